//! The energy sweep over `s` for the recovery fields of a Dirac sum.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compactness::detect_vortices;
use super::config::ExperimentConfig;
use super::report::{fmt_f64, ols, Check, LinearFit};
use crate::constants::{make_params, FracParams};
use crate::energy::{f_s, ginzburg_landau};
use crate::error::{Error, Result};
use crate::field::{dist, l2_norm, DomainSpec, VectorField2};
use crate::flatnorm::flat_distance_field_to_dirac;
use crate::riesz::{potential, Normalization};
use crate::topology::{degree, jacobian};
use crate::vortex::{build_recovery, DiracSum};

/// Split parameter of the Ginzburg–Landau columns.
pub const SWEEP_ETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    pub eps: f64,
    #[serde(rename = "F_s")]
    pub f_s: f64,
    pub gagliardo_near: f64,
    pub gagliardo_tail: f64,
    pub gl_dirichlet: f64,
    pub gl_potential: f64,
    /// Flat distance of `J(I~u)` to `pi mu`.
    pub flat_dist: f64,
    pub flat_gap: f64,
    pub deg_boundary: Option<i64>,
    /// `F_s` of the truncated field `u^s`.
    pub f_s_truncated: f64,
    pub flat_dist_truncated: f64,
    pub detected_vortices: usize,
    /// `|u - u^s|_2^2`.
    pub l2_recovery: f64,
    /// `int |grad u^s|^2`.
    pub dirichlet_truncated: f64,
    pub params: Option<FracParams>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(s: f64, r_kernel: f64, e: Error) -> Self {
        let nan = f64::NAN;
        Self {
            s,
            eps: (1.0 - s).sqrt(),
            f_s: nan,
            gagliardo_near: nan,
            gagliardo_tail: nan,
            gl_dirichlet: nan,
            gl_potential: nan,
            flat_dist: nan,
            flat_gap: nan,
            deg_boundary: None,
            f_s_truncated: nan,
            flat_dist_truncated: nan,
            detected_vortices: 0,
            l2_recovery: nan,
            dirichlet_truncated: nan,
            params: make_params(s, r_kernel).ok(),
            error: Some(e.to_string()),
        }
    }

    /// `|u - u^s|^2 / (1-s)^2`.
    pub fn l2_ratio(&self) -> f64 {
        self.l2_recovery / (1.0 - self.s).powi(2)
    }

    /// `int |grad u^s|^2 / |log(1-s)|`.
    pub fn dirichlet_ratio(&self) -> f64 {
        self.dirichlet_truncated / (1.0 - self.s).ln().abs()
    }

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.s),
            fmt_f64(self.eps),
            fmt_f64(self.f_s),
            fmt_f64(self.gagliardo_near),
            fmt_f64(self.gagliardo_tail),
            fmt_f64(self.gl_dirichlet),
            fmt_f64(self.gl_potential),
            fmt_f64(self.flat_dist),
            self.deg_boundary.map_or_else(String::new, |d| d.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedComparison {
    pub grid: usize,
    pub fit: Option<LinearFit>,
    /// The intercept error at `h/2` is no larger than at `h`.
    pub improving: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: usize,
    pub h: f64,
    pub mu: DiracSum,
    pub d0: i64,
    pub r: f64,
    /// Least squares `F_s ~ intercept + slope / |log(1-s)|`.
    pub fit: Option<LinearFit>,
    /// `pi |mu|`.
    pub target: f64,
    pub intercept_tol: f64,
    pub rows: Vec<SweepRow>,
    pub refined: Option<RefinedComparison>,
    pub checks: Vec<Check>,
}

impl SweepReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows.iter().map(SweepRow::csv_fields).collect()
    }

    pub fn ok_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_none())
    }

    pub fn fit_line(&self) -> String {
        match &self.fit {
            Some(f) => format!(
                "fit: F_s = {:.6} + {:.6} / |log(1-s)|, R^2 = {:.6}, target pi|mu| = {:.6}",
                f.intercept, f.slope, f.r2, self.target
            ),
            None => "fit: fewer than two successful rows".into(),
        }
    }
}

fn sweep_row(cfg: &ExperimentConfig, dom: &DomainSpec, mu: &DiracSum, s: f64) -> Result<SweepRow> {
    let params = make_params(s, cfg.kernel_radius)?;
    let rc = cfg.recovery(dom, s)?;
    let pair = build_recovery(&rc, dom)?;
    let energy = f_s(&pair.u, &params)?;
    let energy_s = f_s(&pair.us, &params)?;
    let v = potential(&pair.u, &params, Normalization::Normalized)?;
    let vs = potential(&pair.us, &params, Normalization::Normalized)?;
    let c_pot = SWEEP_ETA * params.c_prime_s / ((1.0 - SWEEP_ETA) * params.c_dprime_s);
    let (gd, gp) = ginzburg_landau(&v, params.eps, c_pot, &dom.tilde_mask())?;
    let opts = cfg.flat_options();
    let flat = flat_distance_field_to_dirac(&v, mu, dom, opts)?;
    let flat_s = flat_distance_field_to_dirac(&vs, mu, dom, opts)?;
    let deg_boundary = degree(&v, &dom.boundary_polyline).ok().map(|d| d.degree);
    let reach = dom.omega_radius + dom.band;
    let detected = detect_vortices(&jacobian(&v), |p| dist(p, dom.center) <= reach).len();
    let diff = VectorField2::combine(1.0, &pair.u, -1.0, &pair.us)?;
    Ok(SweepRow {
        s,
        eps: params.eps,
        f_s: energy.f_s,
        gagliardo_near: energy.gagliardo_near,
        gagliardo_tail: energy.gagliardo_tail,
        gl_dirichlet: gd,
        gl_potential: gp,
        flat_dist: flat.value,
        flat_gap: flat.primal_dual_gap,
        deg_boundary,
        f_s_truncated: energy_s.f_s,
        flat_dist_truncated: flat_s.value,
        detected_vortices: detected,
        l2_recovery: l2_norm(&diff, None),
        dirichlet_truncated: pair.us.dirichlet_integral(None),
        params: Some(params),
        error: None,
    })
}

fn run_rows(cfg: &ExperimentConfig, dom: &DomainSpec, mu: &DiracSum) -> Vec<SweepRow> {
    cfg.s_list
        .par_iter()
        .map(|&s| sweep_row(cfg, dom, mu, s).unwrap_or_else(|e| SweepRow::failed(s, cfg.kernel_radius, e)))
        .collect()
}

fn fit_rows(rows: &[SweepRow]) -> Option<LinearFit> {
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let x: Vec<f64> = ok.iter().map(|r| 1.0 / (1.0 - r.s).ln().abs()).collect();
    let y: Vec<f64> = ok.iter().map(|r| r.f_s).collect();
    ols(&x, &y).ok()
}

/// Runs every `s` of the configuration (in parallel, reported in order) and
/// fits `F_s` against `1/|log(1-s)|`.
pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let dom = cfg.domain()?;
    let mu = cfg.effective_mu(&dom);
    let rows = run_rows(cfg, &dom, &mu);
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(Error::InvalidInput(format!(
            "every sweep row failed; first error: {}",
            rows[0].error.as_deref().unwrap_or("")
        )));
    }
    let fit = fit_rows(&rows);
    let target = PI * mu.total_variation() as f64;
    let intercept_tol = cfg.intercept_tolerance();
    let intercept_err = |f: &Option<LinearFit>| f.as_ref().map_or(f64::INFINITY, |f| (f.intercept - target).abs());

    let refined = if cfg.compare_refined {
        let mut fine = cfg.clone();
        fine.grid = 2 * cfg.grid;
        let fdom = fine.domain()?;
        let fmu = fine.effective_mu(&fdom);
        let fit_fine = fit_rows(&run_rows(&fine, &fdom, &fmu));
        let improving = intercept_err(&fit_fine) <= intercept_err(&fit);
        Some(RefinedComparison { grid: fine.grid, fit: fit_fine, improving })
    } else {
        None
    };

    let mut checks = Vec::new();
    for r in rows.iter().filter(|r| r.error.is_some()) {
        checks.push(Check::new(format!("row s={}", r.s), false, r.error.clone().unwrap_or_default()));
    }
    checks.push(match &fit {
        Some(f) => Check::new(
            "intercept",
            intercept_err(&fit) <= intercept_tol * target.max(PI),
            format!("{:.6} vs pi|mu| = {:.6} (tolerance {}%)", f.intercept, target, 100.0 * intercept_tol),
        ),
        None => Check::new("intercept", false, "fewer than two successful rows"),
    });
    if let Some(rf) = &refined {
        let ic = rf.fit.as_ref().map_or(f64::NAN, |f| f.intercept);
        checks.push(Check::new("refinement", rf.improving, format!("intercept {ic:.6} at grid {}", rf.grid)));
    }
    let mut report =
        SweepReport { grid: cfg.grid, h: dom.grid.h, mu, d0: dom.d0, r: cfg.ball_radius(&dom), fit, target, intercept_tol, rows, refined, checks };
    let extra = recovery_checks(&report);
    report.checks.extend(extra);
    Ok(report)
}

/// The recovery-field estimates along a sweep: bounded `|u - u^s|^2/(1-s)^2`,
/// bounded `int |grad u^s|^2 / |log(1-s)|`, strictly decreasing flat distance
/// (or identically zero).
pub fn recovery_checks(report: &SweepReport) -> Vec<Check> {
    let ok: Vec<&SweepRow> = report.ok_rows().collect();
    let n = report.mu.total_variation() as f64;
    // int_{B_rho} (1 - |x|/rho)^2 dx = pi rho^2 / 6 per core
    let l2_bound = n * PI / 3.0;
    let l2: Vec<f64> = ok.iter().map(|r| r.l2_ratio()).collect();
    let dir: Vec<f64> = ok.iter().map(|r| r.dirichlet_ratio()).collect();
    let flat: Vec<f64> = ok.iter().map(|r| r.flat_dist).collect();
    let first_dir = dir.first().copied().unwrap_or(f64::NAN);
    vec![
        Check::new(
            "l2 recovery ratio bounded",
            !l2.is_empty() && l2.iter().all(|x| x.is_finite() && *x <= l2_bound),
            format!("{l2:.4?} (bound {l2_bound:.4})"),
        ),
        Check::new(
            "dirichlet ratio bounded",
            !dir.is_empty() && dir.iter().all(|x| x.is_finite() && *x <= 1.05 * first_dir),
            format!("{dir:.4?} (bound 1.05 x first = {:.4})", 1.05 * first_dir),
        ),
        Check::new(
            "flat distance strictly decreasing",
            flat.len() >= 2 && flat.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0)),
            format!("{flat:.6?}"),
        ),
    ]
}
