//! Vortex localisation from Jacobian peaks and degree conservation on the
//! dilated boundaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::Check;
use crate::constants::make_params;
use crate::error::{Error, Result};
use crate::field::{dist, DomainSpec};
use crate::flatnorm::flat_distance_field_to_dirac;
use crate::riesz::{potential, Normalization};
use crate::topology::{degree, jacobian, JacobianField};
use crate::vortex::{build_recovery, DiracSum};

/// Peaks below this absolute level are ignored.
pub const PEAK_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detected {
    pub center: [f64; 2],
    /// Sign of the Jacobian at the peak.
    pub sign: i64,
    pub peak: f64,
}

/// Local extrema of `|J|` among the 8 neighbouring cells, at least half the
/// largest value, over cells whose centres satisfy `keep`. Centres are refined
/// by the `|J|`-weighted centroid of the same-sign cells in the 3x3 block.
pub fn detect_vortices(j: &JacobianField, keep: impl Fn([f64; 2]) -> bool) -> Vec<Detected> {
    let (cx, cy) = (j.cells_x(), j.cells_y());
    let inside: Vec<bool> = (0..j.values.len()).map(|c| keep(j.cell_center(c))).collect();
    let max = j.values.iter().zip(&inside).filter(|(_, &k)| k).fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    let threshold = (0.5 * max).max(PEAK_FLOOR);
    let mut found = Vec::new();
    for b in 0..cy {
        for a in 0..cx {
            let c = b * cx + a;
            let v = j.values[c].abs();
            if !inside[c] || v < threshold {
                continue;
            }
            let mut is_peak = true;
            let (mut wx, mut wy, mut wsum) = (0.0, 0.0, 0.0);
            for db in -1i64..=1 {
                for da in -1i64..=1 {
                    let (p, q) = (a as i64 + da, b as i64 + db);
                    if p < 0 || q < 0 || p >= cx as i64 || q >= cy as i64 {
                        continue;
                    }
                    let n = q as usize * cx + p as usize;
                    let w = j.values[n].abs();
                    // ties go to the earlier cell
                    if n != c && (w > v || (w == v && n < c)) {
                        is_peak = false;
                    }
                    if j.values[n].signum() == j.values[c].signum() {
                        let pc = j.cell_center(n);
                        wx += w * pc[0];
                        wy += w * pc[1];
                        wsum += w;
                    }
                }
            }
            if is_peak {
                found.push(Detected { center: [wx / wsum, wy / wsum], sign: j.values[c].signum() as i64, peak: j.values[c] });
            }
        }
    }
    found.sort_by(|x, y| y.peak.abs().total_cmp(&x.peak.abs()));
    found
}

/// Greedy nearest matching of atoms to detections; the distance per atom
/// (infinite when unmatched).
pub fn match_atoms(mu: &DiracSum, found: &[Detected]) -> Vec<f64> {
    let mut used = vec![false; found.len()];
    mu.atoms
        .iter()
        .map(|(p, d)| {
            let best = found
                .iter()
                .enumerate()
                .filter(|(k, f)| !used[*k] && f.sign == d.signum())
                .min_by(|x, y| dist(x.1.center, *p).total_cmp(&dist(y.1.center, *p)));
            match best {
                Some((k, f)) => {
                    used[k] = true;
                    dist(f.center, *p)
                }
                None => f64::INFINITY,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopDegree {
    pub t: f64,
    pub degree: Option<i64>,
    pub winding: f64,
    pub min_modulus: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessRow {
    pub s: f64,
    pub detected: Vec<Detected>,
    pub center_errors: Vec<f64>,
    /// `3h + sqrt(1-s)`.
    pub tolerance: f64,
    pub localized: bool,
    pub degrees: Vec<LoopDegree>,
    pub degrees_ok: bool,
    pub flat_dist: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub d0: i64,
    pub h: f64,
    pub mu: DiracSum,
    pub rows: Vec<CompactnessRow>,
    pub checks: Vec<Check>,
}

impl CompactnessReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn probe_row(cfg: &ExperimentConfig, dom: &DomainSpec, mu: &DiracSum, s: f64) -> Result<CompactnessRow> {
    let params = make_params(s, cfg.kernel_radius)?;
    let rc = cfg.recovery(dom, s)?;
    let pair = build_recovery(&rc, dom)?;
    let v = potential(&pair.u, &params, Normalization::Normalized)?;
    let jac = jacobian(&v);
    let reach = dom.omega_radius + dom.band;
    let detected = detect_vortices(&jac, |p| dist(p, dom.center) <= reach);
    let center_errors = match_atoms(mu, &detected);
    let tolerance = 3.0 * dom.grid.h + (1.0 - s).sqrt();
    let localized = detected.len() == mu.len() && center_errors.iter().all(|e| *e <= tolerance);
    let mut degrees = Vec::new();
    for &t in &cfg.t_list {
        let lp = dom.dilated_loop(t);
        degrees.push(match degree(&v, &lp) {
            Ok(r) => LoopDegree { t, degree: Some(r.degree), winding: r.winding, min_modulus: r.min_modulus, residual: r.residual },
            Err(_) => {
                let vals: Vec<[f64; 2]> = lp.iter().map(|p| v.interpolate(*p)).collect();
                let m = vals.iter().fold(f64::INFINITY, |a, x| a.min(x[0].hypot(x[1])));
                LoopDegree { t, degree: None, winding: f64::NAN, min_modulus: m, residual: f64::NAN }
            }
        });
    }
    let degrees_ok = degrees.iter().all(|d| d.degree == Some(dom.d0));
    let flat = flat_distance_field_to_dirac(&v, mu, dom, cfg.flat_options())?;
    Ok(CompactnessRow {
        s,
        detected,
        center_errors,
        tolerance,
        localized,
        degrees,
        degrees_ok,
        flat_dist: flat.value,
        error: None,
    })
}

/// For each `s`: vortex detection on `J(I~u)`, centre errors against `mu`,
/// degrees of `I~u` on the boundaries of `Omega_t`, flat distance to `pi mu`.
pub fn run_compactness_probe(cfg: &ExperimentConfig) -> Result<CompactnessReport> {
    let dom = cfg.domain()?;
    let mu = cfg.effective_mu(&dom);
    let rows: Vec<CompactnessRow> = cfg
        .s_list
        .par_iter()
        .map(|&s| {
            probe_row(cfg, &dom, &mu, s).unwrap_or_else(|e| CompactnessRow {
                s,
                detected: Vec::new(),
                center_errors: Vec::new(),
                tolerance: f64::NAN,
                localized: false,
                degrees: Vec::new(),
                degrees_ok: false,
                flat_dist: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect();
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(Error::InvalidInput(format!(
            "every row failed; first error: {}",
            rows[0].error.as_deref().unwrap_or("")
        )));
    }
    let mut checks = Vec::new();
    for r in &rows {
        if let Some(e) = &r.error {
            checks.push(Check::new(format!("row s={}", r.s), false, e.clone()));
            continue;
        }
        let worst = r.center_errors.iter().fold(0.0f64, |m, e| m.max(*e));
        checks.push(Check::new(
            format!("localization s={}", r.s),
            r.localized,
            format!("{} peaks for {} atoms, worst centre error {worst:.4} (tolerance {:.4})", r.detected.len(), mu.len(), r.tolerance),
        ));
        let degs: Vec<String> = r.degrees.iter().map(|d| format!("t={}: {:?}", d.t, d.degree)).collect();
        checks.push(Check::new(format!("degree s={}", r.s), r.degrees_ok, format!("{} (d0 = {})", degs.join(", "), dom.d0)));
    }
    if mu.is_empty() {
        let ok: Vec<&CompactnessRow> = rows.iter().filter(|r| r.error.is_none()).collect();
        let nonincreasing = ok.windows(2).all(|w| w[1].flat_dist <= w[0].flat_dist + cfg.flat_tol);
        checks.push(Check::new("flat distance to 0 non-increasing", nonincreasing, format!("{:?}", ok.iter().map(|r| r.flat_dist).collect::<Vec<_>>())));
    }
    Ok(CompactnessReport { d0: dom.d0, h: dom.grid.h, mu, rows, checks })
}
