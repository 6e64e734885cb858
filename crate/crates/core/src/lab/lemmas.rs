//! Lower-bound chain over a battery of admissible fields, the `sigma`-scaling
//! of the seminorm of `x/|x|` on balls, and the three-term splitting of the
//! energy of the recovery field.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{ols, Check, LinearFit};
use crate::constants::{c_s, make_params};
use crate::energy::{gagliardo_parts, lower_bound_check, LowerBoundReport, Region};
use crate::error::{Error, Result};
use crate::field::{dist, sample, DomainSpec, Grid2, VectorField2};
use crate::vortex::{block_value, build_admissible, build_recovery, DiracSum, RecoveryConfig};

/// One random admissible field: the glued map of random charges times a
/// smooth phase `e^{i theta}`, `theta` a sum of bumps supported in Omega.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    pub mu: DiracSum,
    pub r: f64,
    /// `(center, width, amplitude)` per bump.
    pub phase_bumps: Vec<([f64; 2], f64, f64)>,
}

fn random_point(rng: &mut ChaCha8Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    loop {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if p[0] * p[0] + p[1] * p[1] < 1.0 {
            return [center[0] + radius * p[0], center[1] + radius * p[1]];
        }
    }
}

/// Draws a spec with total degree `dom.d0`, atoms in `0.6 Omega` at least
/// `0.25` apart.
pub fn random_field_spec(rng: &mut ChaCha8Rng, dom: &DomainSpec) -> Result<RandomFieldSpec> {
    let inner = 0.6 * dom.omega_radius;
    let mu = loop {
        let n = rng.gen_range(1..=3usize);
        let mut degs: Vec<i64> = (0..n - 1).map(|_| [-2, -1, 1, 2][rng.gen_range(0..4)]).collect();
        let last = dom.d0 - degs.iter().sum::<i64>();
        if last == 0 || last.abs() > 3 {
            continue;
        }
        degs.push(last);
        let atoms: Vec<([f64; 2], i64)> =
            degs.into_iter().map(|d| (dom.grid.snap_to_cell_center(random_point(rng, dom.center, inner)), d)).collect();
        let mu = DiracSum::new(atoms)?;
        if mu.min_separation() >= 0.25 {
            break mu;
        }
    };
    let r = 0.5 * RecoveryConfig::max_radius(&mu, dom);
    let phase_bumps = (0..rng.gen_range(1..=3usize))
        .map(|_| (random_point(rng, dom.center, inner), rng.gen_range(0.1..0.4), rng.gen_range(-2.0..2.0)))
        .collect();
    Ok(RandomFieldSpec { mu, r, phase_bumps })
}

fn bump_value(x: [f64; 2], (c, w, a): ([f64; 2], f64, f64), dom: &DomainSpec) -> f64 {
    let q = dist(x, dom.center) / dom.omega_radius;
    let window = (1.0 - q * q).max(0.0).powi(2);
    a * window * (-dist(x, c).powi(2) / (2.0 * w * w)).exp()
}

pub fn build_random_field(spec: &RandomFieldSpec, dom: &DomainSpec) -> Result<VectorField2> {
    let mut rc = RecoveryConfig::new(spec.mu.clone(), spec.r, 0.5)?;
    rc.core_radius = 0.5 * spec.r;
    let mut u = build_admissible(&rc, dom)?;
    let g = u.grid;
    for k in 0..g.len() {
        if !dom.omega_mask[k] {
            continue;
        }
        let x = g.node_at(k);
        let th: f64 = spec.phase_bumps.iter().map(|b| bump_value(x, *b, dom)).sum();
        let (c, s) = (th.cos(), th.sin());
        let v = u.values[k];
        u.values[k] = [c * v[0] - s * v[1], s * v[0] + c * v[1]];
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCase {
    pub label: String,
    pub s: f64,
    pub report: Option<LowerBoundReport>,
    pub error: Option<String>,
}

impl LowerBoundCase {
    pub fn passes(&self) -> bool {
        self.report.as_ref().is_some_and(LowerBoundReport::passes)
    }
}

/// `sqrt` of the seminorm of `x/|x|` over `B_sigma x B_sigma` against `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub s: f64,
    pub sigmas: Vec<f64>,
    pub seminorms: Vec<f64>,
    /// Log-log fit of `sqrt(seminorm)` against `sigma`.
    pub fit: LinearFit,
    pub exponent: f64,
    pub prefactor: f64,
    /// `prefactor * sqrt(1-s)`.
    pub prefactor_scaled: f64,
}

/// The seminorm of `x/|x|` on `B_sigma`, for each `sigma`, on an `n x n` grid
/// just covering the largest ball.
pub fn ball_seminorms(s: f64, sigmas: &[f64], n: usize) -> Result<Vec<f64>> {
    let smax = sigmas.iter().fold(0.0f64, |m, x| m.max(*x));
    let g = Grid2::centered(2.2 * smax, n)?;
    let reach = dist(g.origin, g.center()) * 2.0;
    let u = sample(|x| block_value(x, [0.0, 0.0], 1), g, reach)?;
    sigmas
        .par_iter()
        .map(|&sig| {
            let mask = g.mask(|p| p[0].hypot(p[1]) < sig);
            Ok(gagliardo_parts(&u, s, Region::within(&mask), None)?.total())
        })
        .collect()
}

pub fn scaling_fit(s: f64, sigmas: &[f64], n: usize) -> Result<ScalingFit> {
    let seminorms = ball_seminorms(s, sigmas, n)?;
    let x: Vec<f64> = sigmas.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = seminorms.iter().map(|v| 0.5 * v.ln()).collect();
    let fit = ols(&x, &y)?;
    let prefactor = fit.intercept.exp();
    Ok(ScalingFit {
        s,
        sigmas: sigmas.to_vec(),
        seminorms,
        exponent: fit.slope,
        prefactor,
        prefactor_scaled: prefactor * (1.0 - s).sqrt(),
        fit,
    })
}

/// The splitting `I1 + I2 + I3` of the energy of the recovery field, all
/// restricted to pairs closer than `tau = sqrt(1-s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub s: f64,
    pub tau: f64,
    /// With the prefactor `(1-s)/|log(1-s)|`.
    pub i1_raw: f64,
    pub i2_raw: f64,
    pub i3_raw: f64,
    /// Multiplied by `c_s`, the normalisation of `F_s`.
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// `N pi^2 / 2`.
    pub i2_bound: f64,
    pub error: Option<String>,
}

fn decomposition(cfg: &ExperimentConfig, dom: &DomainSpec, s: f64) -> Result<Decomposition> {
    let rc = cfg.recovery(dom, s)?;
    let pair = build_recovery(&rc, dom)?;
    let u = &pair.u;
    let g = dom.grid;
    let tau = (1.0 - s).sqrt();
    let pre = (1.0 - s) / (1.0 - s).ln().abs();
    let near = |mask: &[bool], exterior: bool| -> Result<f64> {
        if !mask.iter().any(|&b| b) {
            return Ok(0.0);
        }
        Ok(gagliardo_parts(u, s, Region { mask: Some(mask), exterior }, Some(tau))?.near)
    };
    let (mut i1, mut i2) = (0.0, 0.0);
    for (p, _) in &rc.mu.atoms {
        let core = g.mask(|x| dist(x, *p) < (cfg.m + 1.0) * tau);
        i1 += near(&core, false)?;
        let annulus = g.mask(|x| {
            let d = dist(x, *p);
            d < rc.r && d >= cfg.m * tau
        });
        i2 += near(&annulus, false)?;
    }
    let outside = g.mask(|x| rc.mu.atoms.iter().all(|(p, _)| dist(x, *p) >= rc.r_prime()));
    let i3 = near(&outside, true)?;
    let cs = c_s(s)?;
    let n = rc.mu.total_variation() as f64;
    Ok(Decomposition {
        s,
        tau,
        i1_raw: pre * i1,
        i2_raw: pre * i2,
        i3_raw: pre * i3,
        i1: cs * pre * i1,
        i2: cs * pre * i2,
        i3: cs * pre * i3,
        i2_bound: 0.5 * n * PI * PI,
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lower_bound: Vec<LowerBoundCase>,
    pub scaling: Vec<ScalingFit>,
    pub decomposition: Vec<Decomposition>,
    /// `max_s I3 |log(1-s)|`.
    pub i3_constant: f64,
    pub checks: Vec<Check>,
}

impl LemmaReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn chain_case(label: String, u: &VectorField2, s: f64, cfg: &ExperimentConfig, dom: &DomainSpec) -> LowerBoundCase {
    let run = || -> Result<LowerBoundReport> {
        let params = make_params(s, cfg.kernel_radius)?;
        lower_bound_check(u, &params, dom, &cfg.etas)
    };
    match run() {
        Ok(r) => LowerBoundCase { label, s, report: Some(r), error: None },
        Err(e) => LowerBoundCase { label, s, report: None, error: Some(e.to_string()) },
    }
}

/// Lower-bound chain on `cfg.random_fields` random fields and both recovery
/// fields at every `s`.
pub fn run_lower_bound_battery(cfg: &ExperimentConfig) -> Result<Vec<LowerBoundCase>> {
    let dom = cfg.domain()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let specs: Vec<RandomFieldSpec> = (0..cfg.random_fields).map(|_| random_field_spec(&mut rng, &dom)).collect::<Result<_>>()?;
    let mut fields: Vec<(String, VectorField2)> = specs
        .par_iter()
        .enumerate()
        .map(|(k, sp)| Ok((format!("random {k}"), build_random_field(sp, &dom)?)))
        .collect::<Result<_>>()?;
    let mut per_s: Vec<(String, VectorField2, f64)> = Vec::new();
    for &s in &cfg.s_list {
        let pair = build_recovery(&cfg.recovery(&dom, s)?, &dom)?;
        per_s.push((format!("recovery u, s={s}"), pair.u, s));
        per_s.push((format!("recovery u^s, s={s}"), pair.us, s));
    }
    let mut jobs: Vec<(String, &VectorField2, f64)> = Vec::new();
    for (label, u) in &mut fields {
        for &s in &cfg.s_list {
            jobs.push((label.clone(), &*u, s));
        }
    }
    for (label, u, s) in &per_s {
        jobs.push((label.clone(), u, *s));
    }
    Ok(jobs.into_par_iter().map(|(label, u, s)| chain_case(label, u, s, cfg, &dom)).collect())
}

pub fn run_lemma_suite(cfg: &ExperimentConfig) -> Result<LemmaReport> {
    let dom = cfg.domain()?;
    let lower_bound = run_lower_bound_battery(cfg)?;
    let scaling: Vec<ScalingFit> = cfg.lemma_s.iter().map(|&s| scaling_fit(s, &cfg.lemma_sigmas, cfg.lemma_grid)).collect::<Result<_>>()?;
    let decomposition: Vec<Decomposition> = cfg
        .s_list
        .par_iter()
        .map(|&s| {
            decomposition(cfg, &dom, s).unwrap_or_else(|e| Decomposition {
                s,
                tau: (1.0 - s).sqrt(),
                i1_raw: f64::NAN,
                i2_raw: f64::NAN,
                i3_raw: f64::NAN,
                i1: f64::NAN,
                i2: f64::NAN,
                i3: f64::NAN,
                i2_bound: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect();

    let mut checks = Vec::new();
    let failures: Vec<&LowerBoundCase> = lower_bound.iter().filter(|c| !c.passes()).collect();
    let within_tol = lower_bound
        .iter()
        .filter_map(|c| c.report.as_ref())
        .filter(|r| r.l2_term > r.seminorm_term || r.splits.iter().any(|e| e.bound > r.f_s))
        .count();
    let worst_tol = lower_bound.iter().filter_map(|c| c.report.as_ref()).fold(0.0f64, |m, r| m.max(r.quadrature_tol));
    checks.push(Check::new(
        "lower-bound chain",
        failures.is_empty(),
        match failures.first() {
            None => format!(
                "{} cases hold, {} of them only within the quadrature tolerance (largest {worst_tol:.3e})",
                lower_bound.len(),
                within_tol
            ),
            Some(c) => format!(
                "{} of {} cases violated, first: {} at s={}{}",
                failures.len(),
                lower_bound.len(),
                c.label,
                c.s,
                c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
            ),
        },
    ));

    for f in &scaling {
        let target = 1.0 - f.s;
        checks.push(Check::new(
            format!("ball scaling s={}", f.s),
            (f.exponent - target).abs() <= 0.1,
            format!("exponent {:.4} vs 1-s = {target:.4} (tolerance 0.1), prefactor {:.4}", f.exponent, f.prefactor),
        ));
    }
    let increasing = scaling.windows(2).all(|w| w[1].prefactor > w[0].prefactor);
    checks.push(Check::new(
        "ball scaling prefactor grows with s",
        increasing,
        format!("{:?}", scaling.iter().map(|f| (f.s, f.prefactor)).collect::<Vec<_>>()),
    ));

    let ok: Vec<&Decomposition> = decomposition.iter().filter(|d| d.error.is_none()).collect();
    for d in decomposition.iter().filter(|d| d.error.is_some()) {
        checks.push(Check::new(format!("splitting s={}", d.s), false, d.error.clone().unwrap_or_default()));
    }
    if ok.len() >= 2 {
        let last = ok[ok.len() - 1];
        let i1_ok = ok[..ok.len() - 1].iter().all(|d| last.i1 < d.i1);
        checks.push(Check::new(
            "I1 vanishes",
            i1_ok,
            format!("{:?}", ok.iter().map(|d| (d.s, d.i1)).collect::<Vec<_>>()),
        ));
        let i3_ok = ok.windows(2).all(|w| w[1].i3 < w[0].i3);
        checks.push(Check::new(
            "I3 decreasing",
            i3_ok,
            format!("{:?}", ok.iter().map(|d| (d.s, d.i3)).collect::<Vec<_>>()),
        ));
    }
    let i3_constant = ok.iter().map(|d| d.i3 * (1.0 - d.s).ln().abs()).fold(0.0f64, f64::max);
    if ok.is_empty() {
        return Err(Error::InvalidInput("no splitting row succeeded".into()));
    }
    Ok(LemmaReport { lower_bound, scaling, decomposition, i3_constant, checks })
}
