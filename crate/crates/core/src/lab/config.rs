//! Line-oriented `key = value` experiment configuration.
//!
//! ```text
//! # single vortex
//! grid = 256
//! mu = (0,0):1
//! d0 = 1
//! s_list = 0.9, 0.95, 0.99, 0.995, 0.999
//! ```
//!
//! Blank lines and `#` comments are ignored; unknown or repeated keys are errors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DomainSpec, Grid2};
use crate::flatnorm::{FlatBall, FlatDistanceOptions, FlatMethod, SolverOptions};
use crate::vortex::{DiracSum, RecoveryConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Nodes per side.
    pub grid: usize,
    /// Side length of the square grid, centred at the origin.
    pub side: f64,
    pub omega_radius: f64,
    /// Half-width of the neighbourhood U of the boundary.
    pub band: f64,
    pub kernel_radius: f64,
    pub d0: i64,
    pub mu: DiracSum,
    pub s_list: Vec<f64>,
    /// Ball radius `r`; `None` picks half the largest admissible value, at most 0.5.
    pub r: Option<f64>,
    /// The proof parameter `M > 2`.
    pub m: f64,
    pub etas: Vec<f64>,
    pub t_list: Vec<f64>,
    pub split_charges: bool,
    /// Spacing of split unit charges; `None` means `4h`.
    pub split_delta: Option<f64>,
    pub flat_coarsen: usize,
    pub flat_tol: f64,
    pub flat_max_iter: usize,
    pub flat_ball: FlatBall,
    pub flat_method: FlatMethod,
    pub random_fields: usize,
    pub lemma_s: Vec<f64>,
    pub lemma_sigmas: Vec<f64>,
    pub lemma_grid: usize,
    pub compare_refined: bool,
    /// Relative tolerance on the fitted intercept; `None` means 0.10, or 0.15
    /// when `mu` has charges of both signs.
    pub intercept_tol: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: 128,
            side: 4.0,
            omega_radius: 1.0,
            band: 0.25,
            kernel_radius: 4.0,
            d0: 1,
            mu: DiracSum::single([0.0, 0.0], 1).expect("nonzero degree"),
            s_list: vec![0.9, 0.95, 0.99, 0.995, 0.999],
            r: None,
            m: 8.0,
            etas: vec![0.25, 0.5, 0.75],
            t_list: vec![0.05, 0.1, 0.15],
            split_charges: true,
            split_delta: None,
            flat_coarsen: 4,
            flat_tol: 1e-6,
            flat_max_iter: 400_000,
            flat_ball: FlatBall::Paper,
            flat_method: FlatMethod::Flow,
            random_fields: 50,
            lemma_s: vec![0.5, 0.8],
            lemma_sigmas: vec![0.25, 0.35, 0.5, 0.7, 1.0],
            lemma_grid: 256,
            compare_refined: false,
            intercept_tol: None,
            output_dir: None,
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "grid",
    "side",
    "omega_radius",
    "band",
    "kernel_radius",
    "d0",
    "mu",
    "s_list",
    "r",
    "m",
    "etas",
    "t_list",
    "split_charges",
    "split_delta",
    "flat_coarsen",
    "flat_tol",
    "flat_max_iter",
    "flat_ball",
    "flat_method",
    "random_fields",
    "lemma_s",
    "lemma_sigmas",
    "lemma_grid",
    "compare_refined",
    "intercept_tol",
    "output_dir",
    "seed",
];

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn parse_f64(v: &str, line: usize, key: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| cfg_err(line, format!("{key}: expected a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(cfg_err(line, format!("{key}: value must be finite")));
    }
    Ok(x)
}

fn parse_list(v: &str, line: usize, key: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_f64(x.trim(), line, key)).collect()
}

fn parse_int<T: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<T> {
    v.parse().map_err(|_| cfg_err(line, format!("{key}: expected an integer, got {v:?}")))
}

fn parse_bool(v: &str, line: usize, key: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(cfg_err(line, format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_auto(v: &str, line: usize, key: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_f64(v, line, key).map(Some)
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses and validates; errors carry the 1-based line number (0 when
    /// the problem comes from a default value).
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| cfg_err(line, format!("expected `key = value`, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(cfg_err(line, format!("unknown key {key:?}")));
            }
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(cfg_err(line, format!("key {key:?} already set on line {first}")));
            }
            cfg.set(key, value, line)?;
        }
        cfg.validate(&seen)?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str, line: usize) -> Result<()> {
        match key {
            "grid" => self.grid = parse_int(v, line, key)?,
            "side" => self.side = parse_f64(v, line, key)?,
            "omega_radius" => self.omega_radius = parse_f64(v, line, key)?,
            "band" => self.band = parse_f64(v, line, key)?,
            "kernel_radius" => self.kernel_radius = parse_f64(v, line, key)?,
            "d0" => self.d0 = parse_int(v, line, key)?,
            "mu" => {
                self.mu = if v == "none" {
                    DiracSum::default()
                } else {
                    DiracSum::parse(v).map_err(|e| cfg_err(line, e.to_string()))?
                }
            }
            "s_list" => self.s_list = parse_list(v, line, key)?,
            "r" => self.r = parse_auto(v, line, key)?,
            "m" => self.m = parse_f64(v, line, key)?,
            "etas" => self.etas = parse_list(v, line, key)?,
            "t_list" => self.t_list = parse_list(v, line, key)?,
            "split_charges" => self.split_charges = parse_bool(v, line, key)?,
            "split_delta" => self.split_delta = parse_auto(v, line, key)?,
            "flat_coarsen" => self.flat_coarsen = parse_int(v, line, key)?,
            "flat_tol" => self.flat_tol = parse_f64(v, line, key)?,
            "flat_max_iter" => self.flat_max_iter = parse_int(v, line, key)?,
            "flat_ball" => {
                self.flat_ball = match v {
                    "paper" => FlatBall::Paper,
                    "simple" => FlatBall::Simple,
                    _ => return Err(cfg_err(line, format!("flat_ball: expected paper or simple, got {v:?}"))),
                }
            }
            "flat_method" => {
                self.flat_method = match v {
                    "flow" => FlatMethod::Flow,
                    "primal_dual" => FlatMethod::PrimalDual,
                    _ => return Err(cfg_err(line, format!("flat_method: expected flow or primal_dual, got {v:?}"))),
                }
            }
            "random_fields" => self.random_fields = parse_int(v, line, key)?,
            "lemma_s" => self.lemma_s = parse_list(v, line, key)?,
            "lemma_sigmas" => self.lemma_sigmas = parse_list(v, line, key)?,
            "lemma_grid" => self.lemma_grid = parse_int(v, line, key)?,
            "compare_refined" => self.compare_refined = parse_bool(v, line, key)?,
            "intercept_tol" => self.intercept_tol = parse_auto(v, line, key)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            "seed" => self.seed = parse_int(v, line, key)?,
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Checks every precondition upfront; the line number is that of the
    /// offending key, or 0 for defaults.
    fn validate(&self, seen: &HashMap<String, usize>) -> Result<()> {
        let at = |key: &str| seen.get(key).copied().unwrap_or(0);
        let open_unit = |xs: &[f64], key: &str| -> Result<()> {
            if xs.is_empty() {
                return Err(cfg_err(at(key), format!("{key} must not be empty")));
            }
            for w in xs.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(cfg_err(at(key), format!("{key} must be strictly increasing")));
                }
            }
            if xs.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                return Err(cfg_err(at(key), format!("{key} values must lie in (0, 1)")));
            }
            Ok(())
        };
        open_unit(&self.s_list, "s_list")?;
        open_unit(&self.lemma_s, "lemma_s")?;
        if self.etas.iter().any(|&e| !(e > 0.0 && e < 1.0)) || self.etas.is_empty() {
            return Err(cfg_err(at("etas"), "etas must be a nonempty list in (0, 1)"));
        }
        if !(self.m > 2.0) {
            return Err(cfg_err(at("m"), "m must exceed 2"));
        }
        if self.grid < 8 || self.lemma_grid < 8 {
            return Err(cfg_err(at(if self.grid < 8 { "grid" } else { "lemma_grid" }), "grid needs at least 8 nodes per side"));
        }
        if self.flat_coarsen == 0 {
            return Err(cfg_err(at("flat_coarsen"), "flat_coarsen must be at least 1"));
        }
        if !(self.flat_tol > 0.0) {
            return Err(cfg_err(at("flat_tol"), "flat_tol must be positive"));
        }
        if self.lemma_sigmas.len() < 2 || self.lemma_sigmas.iter().any(|&x| !(x > 0.0)) {
            return Err(cfg_err(at("lemma_sigmas"), "lemma_sigmas needs at least two positive radii"));
        }
        let dom = self.domain().map_err(|e| {
            let key = ["side", "omega_radius", "band", "kernel_radius", "grid"].into_iter().map(at).max().unwrap_or(0);
            cfg_err(key, e.to_string())
        })?;
        for &t in &self.t_list {
            if !(t > 0.0 && t < dom.t0()) {
                return Err(cfg_err(at("t_list"), format!("t = {t} must lie in (0, t0 = {})", dom.t0())));
            }
        }
        let support = crate::vortex::datum_support(&dom);
        if !(self.kernel_radius > 2.0 * support) {
            return Err(cfg_err(
                at("kernel_radius"),
                format!("kernel_radius must exceed the support diameter {}", 2.0 * support),
            ));
        }
        if 2.0 * support > self.side {
            return Err(cfg_err(at("side"), "the boundary datum does not fit in the grid"));
        }
        let mu = self.effective_mu(&dom);
        if mu.total_degree() != self.d0 {
            return Err(cfg_err(
                at("mu").max(at("d0")),
                format!("total degree {} of mu differs from d0 = {}", mu.total_degree(), self.d0),
            ));
        }
        for s in &self.s_list {
            let rc = self.recovery(&dom, *s).map_err(|e| cfg_err(at("r").max(at("mu")), e.to_string()))?;
            rc.validate(&dom).map_err(|e| cfg_err(at("r").max(at("mu")), e.to_string()))?;
        }
        if let Some(t) = self.intercept_tol {
            if !(t > 0.0) {
                return Err(cfg_err(at("intercept_tol"), "intercept_tol must be positive"));
            }
        }
        Ok(())
    }

    pub fn grid2(&self) -> Result<Grid2> {
        Grid2::centered(self.side, self.grid)
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        self.domain_on(self.grid2()?)
    }

    pub fn domain_on(&self, grid: Grid2) -> Result<DomainSpec> {
        DomainSpec::disk(grid, [0.0, 0.0], self.omega_radius, self.band, self.kernel_radius, self.d0)
    }

    /// The configured Dirac sum as used on `dom`: split into unit charges if
    /// requested and snapped to cell centres.
    pub fn effective_mu(&self, dom: &DomainSpec) -> DiracSum {
        let mu = if self.split_charges {
            self.mu.split_unit(self.split_delta.unwrap_or(4.0 * dom.grid.h))
        } else {
            self.mu.clone()
        };
        mu.snapped(&dom.grid)
    }

    pub fn ball_radius(&self, dom: &DomainSpec) -> f64 {
        let mu = self.effective_mu(dom);
        self.r.unwrap_or_else(|| (0.5 * RecoveryConfig::max_radius(&mu, dom)).min(0.5))
    }

    pub fn recovery(&self, dom: &DomainSpec, s: f64) -> Result<RecoveryConfig> {
        RecoveryConfig::new(self.effective_mu(dom), self.ball_radius(dom), s)
    }

    pub fn flat_options(&self) -> FlatDistanceOptions {
        FlatDistanceOptions {
            coarsen: self.flat_coarsen,
            solver: SolverOptions { tol: self.flat_tol, max_iter: self.flat_max_iter, method: self.flat_method },
            ball: self.flat_ball,
        }
    }

    /// Relative tolerance for the fitted intercept against `pi |mu|`.
    pub fn intercept_tolerance(&self) -> f64 {
        self.intercept_tol.unwrap_or_else(|| {
            let mixed = self.mu.atoms.iter().any(|a| a.1 > 0) && self.mu.atoms.iter().any(|a| a.1 < 0);
            if mixed {
                0.15
            } else {
                0.10
            }
        })
    }

    /// Documented text form (round-trips through [`ExperimentConfig::parse`]).
    pub fn to_text(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let auto = |x: Option<f64>| x.map_or("auto".to_string(), |v| v.to_string());
        let mu = if self.mu.is_empty() {
            "none".to_string()
        } else {
            self.mu.atoms.iter().map(|(p, d)| format!("({},{}):{}", p[0], p[1], d)).collect::<Vec<_>>().join("; ")
        };
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("grid", self.grid.to_string());
        kv("side", self.side.to_string());
        kv("omega_radius", self.omega_radius.to_string());
        kv("band", self.band.to_string());
        kv("kernel_radius", self.kernel_radius.to_string());
        kv("d0", self.d0.to_string());
        kv("mu", mu);
        kv("s_list", list(&self.s_list));
        kv("r", auto(self.r));
        kv("m", self.m.to_string());
        kv("etas", list(&self.etas));
        kv("t_list", list(&self.t_list));
        kv("split_charges", self.split_charges.to_string());
        kv("split_delta", auto(self.split_delta));
        kv("flat_coarsen", self.flat_coarsen.to_string());
        kv("flat_tol", self.flat_tol.to_string());
        kv("flat_max_iter", self.flat_max_iter.to_string());
        kv("flat_ball", match self.flat_ball {
            FlatBall::Paper => "paper".into(),
            FlatBall::Simple => "simple".into(),
        });
        kv("flat_method", match self.flat_method {
            FlatMethod::Flow => "flow".into(),
            FlatMethod::PrimalDual => "primal_dual".into(),
        });
        kv("random_fields", self.random_fields.to_string());
        kv("lemma_s", list(&self.lemma_s));
        kv("lemma_sigmas", list(&self.lemma_sigmas));
        kv("lemma_grid", self.lemma_grid.to_string());
        kv("compare_refined", self.compare_refined.to_string());
        kv("intercept_tol", auto(self.intercept_tol));
        if let Some(d) = &self.output_dir {
            kv("output_dir", d.display().to_string());
        }
        kv("seed", self.seed.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(e: Error) -> usize {
        match e {
            Error::Config { line, .. } => line,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn parses_values_and_comments() {
        let text = "# two vortices\ngrid = 64\n\nmu = (-0.4,0):1; (0.4,0):1  # equal charges\nd0 = 2\ns_list = 0.9, 0.99\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.grid, 64);
        assert_eq!(cfg.mu.len(), 2);
        assert_eq!(cfg.s_list, vec![0.9, 0.99]);
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(line_of(ExperimentConfig::parse("grid = 64\nbogus = 1\n").unwrap_err()), 2);
        assert_eq!(line_of(ExperimentConfig::parse("grid = 64\n\ngrid = 32\n").unwrap_err()), 3);
        assert_eq!(line_of(ExperimentConfig::parse("s_list = 0.9, 0.8\n").unwrap_err()), 1);
        assert_eq!(line_of(ExperimentConfig::parse("\ns_list = 0.9, 1.2\n").unwrap_err()), 2);
        assert_eq!(line_of(ExperimentConfig::parse("grid 64\n").unwrap_err()), 1);
        assert_eq!(line_of(ExperimentConfig::parse("m = x\n").unwrap_err()), 1);
        assert_eq!(line_of(ExperimentConfig::parse("grid = 64\nmu = (0,0):2\n").unwrap_err()), 2);
        assert_eq!(line_of(ExperimentConfig::parse("t_list = 0.3\n").unwrap_err()), 1);
    }

    #[test]
    fn split_and_snap() {
        let cfg = ExperimentConfig::parse("grid = 64\nmu = (0,0):2\nd0 = 2\ns_list = 0.99, 0.999\n").unwrap();
        let dom = cfg.domain().unwrap();
        let mu = cfg.effective_mu(&dom);
        assert_eq!(mu.len(), 2);
        assert!((mu.min_separation() - 4.0 * dom.grid.h).abs() < 1e-12);
        assert!(cfg.ball_radius(&dom) < 0.5 * mu.min_separation());
        // cores of radius 1 - s = 0.1 do not fit between charges 4h apart
        assert!(ExperimentConfig::parse("grid = 64\nmu = (0,0):2\nd0 = 2\n").is_err());
    }
}
