//! Euler Gamma and the s-dependent normalisation constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Euler Gamma for positive arguments (Lanczos, reflection below 1/2).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidInput(format!("gamma_fn needs x > 0, got {x}")));
    }
    Ok(gamma_pos(x))
}

fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_pos(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + LANCZOS_G + 0.5;
        for (k, c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + k as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// All constants attached to a fractional order `s` and kernel radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub s: f64,
    /// `sqrt(1 - s)`, the Ginzburg–Landau length.
    pub eps: f64,
    #[serde(rename = "R")]
    pub r_kernel: f64,
    /// Riesz normalisation `pi 2^(1-s) Gamma((1-s)/2) / Gamma((1+s)/2)`.
    pub gamma_s: f64,
    /// Seminorm-to-gradient constant, `(1-s) c_s` multiplies the Gagliardo seminorm.
    pub c_s: f64,
    /// `c_s pi / R^(2s)`.
    pub c_prime_s: f64,
    /// `quoz_factor^2`, the ratio `|I u|^2 / |I~ u|^2`.
    pub c_dprime_s: f64,
    /// `gamma_s^-1 * 2 pi R^(1-s) / (1-s)`; the raw potential is this multiple of the normalised one.
    pub quoz_factor: f64,
}

impl FracParams {
    /// Prefactor of the fractional gradient integral, `(1+s) / gamma_s`.
    pub fn frac_grad_const(&self) -> f64 {
        (1.0 + self.s) / self.gamma_s
    }

    /// `|log(1-s)|`.
    pub fn log_scale(&self) -> f64 {
        (1.0 - self.s).ln().abs()
    }

    /// Prefactor of the normalised kernel `(1-s) / (2 pi R^(1-s))`.
    pub fn normalized_prefactor(&self) -> f64 {
        (1.0 - self.s) / (2.0 * PI * self.r_kernel.powf(1.0 - self.s))
    }
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::OrderOutOfRange(s))
    }
}

/// Closed form of the seminorm normalisation:
/// `c_s = s 4^s Gamma(1+s) / (2 pi Gamma(2-s))`, so that
/// `int |grad_s u|^2 = (1-s) c_s [u]^2_{s,2}` and `c_s -> 2/pi`.
pub fn c_s(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(s * 4f64.powf(s) * gamma_pos(1.0 + s) / (2.0 * PI * gamma_pos(2.0 - s)))
}

/// `(1-s) c_s`.
pub fn bbm_weight(s: f64) -> Result<f64> {
    Ok((1.0 - s) * c_s(s)?)
}

pub fn make_params(s: f64, r_kernel: f64) -> Result<FracParams> {
    check_order(s)?;
    if !(r_kernel > 0.0) || !r_kernel.is_finite() {
        return Err(Error::InvalidInput(format!("kernel radius must be positive, got {r_kernel}")));
    }
    let gamma_s = PI * 2f64.powf(1.0 - s) * gamma_pos(0.5 * (1.0 - s)) / gamma_pos(0.5 * (1.0 + s));
    let c = c_s(s)?;
    let quoz_factor = 2.0 * PI * r_kernel.powf(1.0 - s) / ((1.0 - s) * gamma_s);
    Ok(FracParams {
        s,
        eps: (1.0 - s).sqrt(),
        r_kernel,
        gamma_s,
        c_s: c,
        c_prime_s: c * PI / r_kernel.powf(2.0 * s),
        c_dprime_s: quoz_factor * quoz_factor,
        quoz_factor,
    })
}
