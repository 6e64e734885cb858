//! Cell integrals of the power-law kernels `|z|^-p` on a square lattice.
//!
//! The origin cell is integrated exactly in polar coordinates. Cells next to
//! the origin are subdivided before applying 3-point Gauss–Legendre, since the
//! kernel varies by orders of magnitude across them.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const GL3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// `int_0^{pi/4} g(theta) d theta` with 24-point Gauss–Legendre.
fn octant_integral(g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(24);
    x.iter().zip(&w).map(|(xi, wi)| wi * g(FRAC_PI_4 * 0.5 * (xi + 1.0))).sum::<f64>() * FRAC_PI_4 * 0.5
}

/// `int_{[-h/2, h/2]^2} |z|^-p dz`, exact up to a smooth 1D quadrature; needs `p < 2`.
pub fn origin_cell_integral(p: f64, h: f64) -> f64 {
    assert!(p < 2.0, "origin cell integral diverges for p >= 2");
    let e = 2.0 - p;
    8.0 / e * (0.5 * h).powf(e) * octant_integral(|t| t.cos().powf(-e))
}

/// `int |z|^-p` over the cell of side `h` centred at `(ix h, iy h) != 0`.
pub fn cell_power_integral(p: f64, ix: i64, iy: i64, h: f64) -> f64 {
    cell_integral(|x, y| (x * x + y * y).powf(-0.5 * p), ix, iy, h)
}

/// `int_cell g(z) dz` for an off-origin cell.
pub fn cell_integral(g: impl Fn(f64, f64) -> f64, ix: i64, iy: i64, h: f64) -> f64 {
    debug_assert!(ix != 0 || iy != 0);
    let d = ix.abs().max(iy.abs());
    let m: usize = match d {
        1 => 16,
        2 => 6,
        3 | 4 => 2,
        _ => 1,
    };
    let sub = h / m as f64;
    let x0 = (ix as f64 - 0.5) * h;
    let y0 = (iy as f64 - 0.5) * h;
    let mut total = 0.0;
    for a in 0..m {
        for b in 0..m {
            let cx = x0 + (a as f64 + 0.5) * sub;
            let cy = y0 + (b as f64 + 0.5) * sub;
            for (xa, wa) in GL3_X.iter().zip(&GL3_W) {
                let x = cx + 0.5 * sub * xa;
                for (yb, wb) in GL3_X.iter().zip(&GL3_W) {
                    let y = cy + 0.5 * sub * yb;
                    total += wa * wb * g(x, y);
                }
            }
        }
    }
    total * 0.25 * sub * sub
}

/// `int |z|^-p` over `{ z : max(|z_1|, |z_2|) > a, |z| < c }` for `p > 2`
/// (`c = inf` allowed).
pub fn outside_box_integral(p: f64, a: f64, c: f64) -> f64 {
    assert!(p > 2.0);
    let e = p - 2.0;
    let cap = if c.is_finite() { c.powf(-e) } else { 0.0 };
    8.0 / e * octant_integral(|t| {
        let r0 = a / t.cos();
        if r0 >= c {
            0.0
        } else {
            r0.powf(-e) - cap
        }
    })
}

/// Values on the lattice offsets `[-k, k]^2`, filled from the octant
/// `0 <= iy <= ix <= k` (the kernels here are invariant under the square's symmetries).
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTable {
    pub k: usize,
    pub data: Vec<f64>,
}

impl OffsetTable {
    pub fn from_octant(k: usize, f: impl Fn(i64, i64) -> f64 + Sync) -> Self {
        let side = 2 * k + 1;
        let octant: Vec<Vec<f64>> = (0..=k as i64)
            .into_par_iter()
            .map(|ix| (0..=ix).map(|iy| f(ix, iy)).collect())
            .collect();
        let mut data = vec![0.0; side * side];
        let ki = k as i64;
        for dy in -ki..=ki {
            for dx in -ki..=ki {
                let (a, b) = (dx.abs(), dy.abs());
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                data[((dy + ki) as usize) * side + (dx + ki) as usize] = octant[hi as usize][lo as usize];
            }
        }
        Self { k, data }
    }

    #[inline]
    pub fn side(&self) -> usize {
        2 * self.k + 1
    }

    #[inline]
    pub fn get(&self, dx: i64, dy: i64) -> f64 {
        let k = self.k as i64;
        self.data[((dy + k) as usize) * self.side() + (dx + k) as usize]
    }

    /// Copy restricted to offsets `[-k', k']^2`.
    pub fn clipped(&self, k_new: usize) -> Self {
        if k_new >= self.k {
            return self.clone();
        }
        let side = 2 * k_new + 1;
        let kn = k_new as i64;
        let mut data = Vec::with_capacity(side * side);
        for dy in -kn..=kn {
            for dx in -kn..=kn {
                data.push(self.get(dx, dy));
            }
        }
        Self { k: k_new, data }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
