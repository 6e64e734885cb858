//! Gagliardo seminorms, the scaled energy `F_s`, Ginzburg–Landau terms and
//! the comparison chain between the potential defect and the seminorm.
//!
//! The seminorm is discretised offset by offset:
//!
//! ```text
//! [u]^2 ~ sum_{z != 0} W(z) S(z) + D0 (S(e1) + S(e2)) / (2 h^2) + tail
//! S(z)  = h^2 sum_x |u(x + z) - u(x)|^2
//! W(z)  = int_{cell z} |w|^-2s dw / |z|^2
//! ```
//!
//! `W` reproduces the exact double integral of every linear field on each
//! orbit of the square's symmetry group, and the `D0` term (the origin cell)
//! is the same gradient expansion. All `S(z)` come from one FFT
//! autocorrelation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{bbm_weight, FracParams};
use crate::error::{Error, Result};
use crate::fft::correlate;
use crate::field::{masked_sum, DomainSpec, VectorField2};
use crate::quadrature::{cell_power_integral, origin_cell_integral, outside_box_integral, OffsetTable};
use crate::riesz::{gradient_of, potential, Normalization};

/// Pairs entering a restricted seminorm: both points in `mask` (all grid
/// nodes when `None`), and, if `exterior`, also every point off the grid.
#[derive(Debug, Clone, Copy)]
pub struct Region<'a> {
    pub mask: Option<&'a [bool]>,
    pub exterior: bool,
}

impl Region<'_> {
    /// All of `R^2 x R^2`.
    pub const FULL: Region<'static> = Region { mask: None, exterior: true };

    pub fn within(mask: &[bool]) -> Region<'_> {
        Region { mask: Some(mask), exterior: false }
    }
}

/// Seminorm split at a pair distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormParts {
    /// Pairs with `|x - y| < cutoff` (the diagonal cell included).
    pub near: f64,
    pub tail: f64,
}

impl SeminormParts {
    pub fn total(&self) -> f64 {
        self.near + self.tail
    }
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::OrderOutOfRange(s))
    }
}

fn weight_table(s: f64, h: f64, k: usize) -> OffsetTable {
    OffsetTable::from_octant(k, |ix, iy| {
        if ix == 0 && iy == 0 {
            0.0
        } else {
            cell_power_integral(2.0 * s, ix, iy, h) / ((ix * ix + iy * iy) as f64 * h * h)
        }
    })
}

/// `S(z) / h^2` over the offset box `[-(n-1), n-1]^2` by FFT correlations.
fn increments_fft(u: &VectorField2, region: Region) -> Result<(OffsetTable, f64)> {
    let g = u.grid;
    let k = g.nx.max(g.ny) - 1;
    let m: Vec<f64> = match region.mask {
        Some(mask) => mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0; g.len()],
    };
    let mu0: Vec<f64> = u.values.iter().zip(&m).map(|(v, w)| w * v[0]).collect();
    let mu1: Vec<f64> = u.values.iter().zip(&m).map(|(v, w)| w * v[1]).collect();
    let msq: Vec<f64> = u.values.iter().zip(&m).map(|(v, w)| w * (v[0] * v[0] + v[1] * v[1])).collect();
    let total = masked_sum(g, None, |q| msq[q]);
    let q = correlate(&[(&mu0, &mu0), (&mu1, &mu1)], g.nx, g.ny, k)?;
    let mut out = q.clone();
    if region.mask.is_none() && region.exterior {
        for (o, c) in out.data.iter_mut().zip(&q.data) {
            *o = 2.0 * total - 2.0 * c;
        }
    } else {
        let p = correlate(&[(&msq, &m)], g.nx, g.ny, k)?;
        let e = if region.exterior {
            let ones = vec![1.0; g.len()];
            Some(correlate(&[(&msq, &ones)], g.nx, g.ny, k)?)
        } else {
            None
        };
        let ki = k as i64;
        let side = out.side();
        for dy in -ki..=ki {
            for dx in -ki..=ki {
                let mut v = p.get(dx, dy) + p.get(-dx, -dy) - 2.0 * q.get(dx, dy);
                if let Some(e) = &e {
                    v += 2.0 * total - e.get(dx, dy) - e.get(-dx, -dy);
                }
                out.data[((dy + ki) as usize) * side + (dx + ki) as usize] = v;
            }
        }
    }
    Ok((out, total))
}

/// Same table by explicit pair loops; quartic in the grid side.
fn increments_direct(u: &VectorField2, region: Region) -> (OffsetTable, f64) {
    let g = u.grid;
    let k = g.nx.max(g.ny) - 1;
    let inside = |q: usize| region.mask.map_or(true, |m| m[q]);
    let sq = |v: [f64; 2]| v[0] * v[0] + v[1] * v[1];
    let total = masked_sum(g, region.mask, |q| sq(u.values[q]));
    let ki = k as i64;
    let side = 2 * k + 1;
    let mut data = vec![0.0; side * side];
    for dy in -ki..=ki {
        for dx in -ki..=ki {
            let mut acc = 0.0;
            for j in 0..g.ny as i64 {
                for i in 0..g.nx as i64 {
                    let qx = g.index(i as usize, j as usize);
                    if !inside(qx) {
                        continue;
                    }
                    let on_grid = |p: i64, l: i64| p >= 0 && l >= 0 && p < g.nx as i64 && l < g.ny as i64;
                    let (p, l) = (i + dx, j + dy);
                    if on_grid(p, l) {
                        let qy = g.index(p as usize, l as usize);
                        if inside(qy) {
                            let (a, b) = (u.values[qx], u.values[qy]);
                            acc += sq([a[0] - b[0], a[1] - b[1]]);
                        }
                    } else if region.exterior {
                        acc += sq(u.values[qx]);
                    }
                    // pairs (x - z, x) whose first point is off the grid
                    if region.exterior && !on_grid(i - dx, j - dy) {
                        acc += sq(u.values[qx]);
                    }
                }
            }
            data[((dy + ki) as usize) * side + (dx + ki) as usize] = acc;
        }
    }
    (OffsetTable { k, data }, total)
}

fn assemble(inc: &OffsetTable, total: f64, s: f64, h: f64, exterior: bool, cutoff: Option<f64>) -> Result<SeminormParts> {
    if let Some(r) = cutoff {
        if !(r >= h) {
            return Err(Error::CutoffBelowSpacing { cutoff: r, h });
        }
    }
    let k = inc.k;
    let w = weight_table(s, h, k);
    let h2 = h * h;
    let ki = k as i64;
    let (mut near, mut tail) = (0.0, 0.0);
    for dy in -ki..=ki {
        let (mut rn, mut rt) = (0.0, 0.0);
        for dx in -ki..=ki {
            if dx == 0 && dy == 0 {
                continue;
            }
            let v = w.get(dx, dy) * h2 * inc.get(dx, dy);
            let d = ((dx * dx + dy * dy) as f64).sqrt() * h;
            if cutoff.map_or(true, |r| d < r) {
                rn += v;
            } else {
                rt += v;
            }
        }
        near += rn;
        tail += rt;
    }
    let grad_sq = 0.5 * (inc.get(1, 0) + inc.get(0, 1));
    near += grad_sq * origin_cell_integral(2.0 * s, h);
    if exterior {
        // beyond the box every pair has one point off the grid
        let p = 2.0 + 2.0 * s;
        let a = (k as f64 + 0.5) * h;
        let far = 2.0 * total * h2 * outside_box_integral(p, a, f64::INFINITY);
        match cutoff {
            Some(r) => {
                let inner = 2.0 * total * h2 * outside_box_integral(p, a, r);
                near += inner;
                tail += far - inner;
            }
            None => near += far,
        }
    }
    Ok(SeminormParts { near: near.max(0.0), tail: tail.max(0.0) })
}

/// `[u]^2_{s,2}` restricted to `region x region`, split at `cutoff`
/// (everything counts as near when `cutoff` is `None`).
pub fn gagliardo_parts(u: &VectorField2, s: f64, region: Region, cutoff: Option<f64>) -> Result<SeminormParts> {
    check_order(s)?;
    let (inc, total) = increments_fft(u, region)?;
    assemble(&inc, total, s, u.grid.h, region.exterior, cutoff)
}

/// Reference evaluation of [`gagliardo_parts`] by the explicit double sum.
pub fn gagliardo_parts_direct(u: &VectorField2, s: f64, region: Region, cutoff: Option<f64>) -> Result<SeminormParts> {
    check_order(s)?;
    let (inc, total) = increments_direct(u, region);
    assemble(&inc, total, s, u.grid.h, region.exterior, cutoff)
}

/// `int int |u(x) - u(y)|^2 / |x - y|^(2+2s)` over all pairs, or over pairs
/// closer than `cutoff`.
pub fn gagliardo_seminorm(u: &VectorField2, s: f64, cutoff: Option<f64>) -> Result<f64> {
    Ok(gagliardo_parts(u, s, Region::FULL, cutoff)?.near)
}

/// `F_s` and the seminorm split, plus Ginzburg–Landau terms when attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub gagliardo: f64,
    pub gagliardo_near: f64,
    pub gagliardo_tail: f64,
    #[serde(rename = "F_s")]
    pub f_s: f64,
    pub gl_dirichlet: f64,
    pub gl_potential: f64,
    pub params: FracParams,
    pub r_s: f64,
}

impl EnergyBreakdown {
    pub fn with_gl(mut self, dirichlet: f64, potential: f64) -> Self {
        self.gl_dirichlet = dirichlet;
        self.gl_potential = potential;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `F_s(u) = (1-s) c_s / |log(1-s)| [u]^2`, split at `r_s = sqrt(1-s)`.
pub fn f_s(u: &VectorField2, params: &FracParams) -> Result<EnergyBreakdown> {
    f_s_split(u, params, params.eps)
}

pub fn f_s_split(u: &VectorField2, params: &FracParams, r_s: f64) -> Result<EnergyBreakdown> {
    let parts = gagliardo_parts(u, params.s, Region::FULL, Some(r_s))?;
    let total = parts.total();
    Ok(EnergyBreakdown {
        gagliardo: total,
        gagliardo_near: parts.near,
        gagliardo_tail: parts.tail,
        f_s: bbm_weight(params.s)? / params.log_scale() * total,
        gl_dirichlet: 0.0,
        gl_potential: 0.0,
        params: *params,
        r_s,
    })
}

/// `(1/|log eps|) int |grad v|^2` and `C/(eps^2 |log eps|) int (|v|^2 - 1)^2` over `region`.
pub fn ginzburg_landau(v: &VectorField2, eps: f64, c_pot: f64, region: &[bool]) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {eps}")));
    }
    let log = eps.ln().abs();
    let dir = v.dirichlet_integral(Some(region)) / log;
    let pot = masked_sum(v.grid, Some(region), |q| {
        let m = v.values[q][0].powi(2) + v.values[q][1].powi(2) - 1.0;
        m * m
    }) * v.grid.cell_area();
    Ok((dir, c_pot / (eps * eps * log) * pot))
}

/// One `eta` of the split `F_s >= (1-eta) ... + eta ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSplit {
    pub eta: f64,
    /// `eta c'_s / ((1-eta) c''_s)`, the potential constant of the GL form.
    pub c_pot: f64,
    pub gl_dirichlet: f64,
    pub gl_potential: f64,
    /// `(1-eta) c''_s / 2 * (gl_dirichlet + gl_potential)`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub params: FracParams,
    /// `int (|I~u|^2 - 1)^2`.
    pub potential_defect: f64,
    /// `4 |u|_inf^2 int |u - I~u|^2`.
    pub l2_term: f64,
    /// `|u|_inf^2 (1-s)^2 R^(2s) / pi [u]^2`.
    pub seminorm_term: f64,
    /// Same with the exponent `2s - 1` on `R`.
    pub seminorm_term_r2s_minus_1: f64,
    pub f_s: f64,
    /// Relative mismatch between `int |grad I u|^2` on the grid and `(1-s) c_s [u]^2`.
    pub quadrature_tol: f64,
    pub first_holds: bool,
    pub second_holds: bool,
    pub splits: Vec<EtaSplit>,
}

impl LowerBoundReport {
    pub fn passes(&self) -> bool {
        self.first_holds && self.second_holds && self.splits.iter().all(|e| e.holds)
    }
}

/// Evaluates the potential/seminorm chain over `Omega~` and the `eta`-split
/// lower bound of `F_s` by Ginzburg–Landau terms of `I~u`.
pub fn lower_bound_check(u: &VectorField2, params: &FracParams, dom: &DomainSpec, etas: &[f64]) -> Result<LowerBoundReport> {
    for &eta in etas {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
        }
    }
    let s = params.s;
    let mask = dom.tilde_mask();
    let g = u.grid;
    let v = potential(u, params, Normalization::Normalized)?;
    let uinf2 = u.norm_inf().powi(2);
    let potential_defect = masked_sum(g, Some(&mask), |q| {
        let m = v.values[q][0].powi(2) + v.values[q][1].powi(2) - 1.0;
        m * m
    }) * g.cell_area();
    let l2 = masked_sum(g, Some(&mask), |q| {
        let (a, b) = (u.values[q], v.values[q]);
        (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
    }) * g.cell_area();
    let energy = f_s(u, params)?;
    let semi = energy.gagliardo;
    let r = params.r_kernel;
    let pre = uinf2 * (1.0 - s).powi(2) / PI;
    let seminorm_term = pre * r.powf(2.0 * s) * semi;
    let seminorm_term_r2s_minus_1 = pre * r.powf(2.0 * s - 1.0) * semi;
    let l2_term = 4.0 * uinf2 * l2;

    // grad I u = q grad I~u
    let grad = gradient_of(&v);
    let grad_full = grad.l2_sq() * params.c_dprime_s;
    let bbm_side = bbm_weight(s)? * semi;
    let quadrature_tol = if bbm_side > 0.0 { (grad_full - bbm_side).abs() / bbm_side } else { 0.0 };
    let slack = 1.0 + quadrature_tol + 1e-12;

    let eps = params.eps;
    let mut splits = Vec::with_capacity(etas.len());
    for &eta in etas {
        let c_pot = eta * params.c_prime_s / ((1.0 - eta) * params.c_dprime_s);
        let (gd, gp) = ginzburg_landau(&v, eps, c_pot, &mask)?;
        let bound = 0.5 * (1.0 - eta) * params.c_dprime_s * (gd + gp);
        splits.push(EtaSplit { eta, c_pot, gl_dirichlet: gd, gl_potential: gp, bound, holds: bound <= energy.f_s * slack });
    }
    Ok(LowerBoundReport {
        params: *params,
        potential_defect,
        l2_term,
        seminorm_term,
        seminorm_term_r2s_minus_1,
        f_s: energy.f_s,
        quadrature_tol,
        first_holds: potential_defect <= l2_term * (1.0 + 1e-12) + 1e-14,
        second_holds: l2_term <= seminorm_term * slack,
        splits,
    })
}
