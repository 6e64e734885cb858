//! Dirac sums and the explicit vortex fields: building blocks, the boundary
//! datum, the glued admissible map and its core-truncated companion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{dist, sample, DomainSpec, Grid2, VectorField2};

/// `mu = sum d_i delta_{x_i}` with nonzero integer charges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiracSum {
    pub atoms: Vec<([f64; 2], i64)>,
}

impl DiracSum {
    pub fn new(atoms: Vec<([f64; 2], i64)>) -> Result<Self> {
        for (p, d) in &atoms {
            if *d == 0 {
                return Err(Error::InvalidInput(format!("atom at {p:?} has zero degree")));
            }
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::InvalidInput("atom position is not finite".into()));
            }
        }
        Ok(Self { atoms })
    }

    pub fn single(p: [f64; 2], d: i64) -> Result<Self> {
        Self::new(vec![(p, d)])
    }

    /// Parses `"(x,y):d; (x,y):d"` (separators `;` or whitespace between atoms).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse atoms {text:?}; expected \"(x,y):d; ...\""));
        let mut atoms = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            rest = rest.trim_start_matches(|c: char| c == ';' || c.is_whitespace());
            if rest.is_empty() {
                break;
            }
            let open = rest.strip_prefix('(').ok_or_else(bad)?;
            let close = open.find(')').ok_or_else(bad)?;
            let (coords, tail) = (&open[..close], &open[close + 1..]);
            let mut it = coords.split(',').map(|v| v.trim().parse::<f64>());
            let x = it.next().ok_or_else(bad)?.map_err(|_| bad())?;
            let y = it.next().ok_or_else(bad)?.map_err(|_| bad())?;
            if it.next().is_some() {
                return Err(bad());
            }
            let tail = tail.trim_start().strip_prefix(':').ok_or_else(bad)?.trim_start();
            let end = tail.find(|c: char| c == ';' || c.is_whitespace()).unwrap_or(tail.len());
            let d = tail[..end].parse::<i64>().map_err(|_| bad())?;
            atoms.push(([x, y], d));
            rest = &tail[end..];
        }
        Self::new(atoms)
    }

    pub fn total_degree(&self) -> i64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn total_variation(&self) -> i64 {
        self.atoms.iter().map(|a| a.1.abs()).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Membership in X(Omega).
    pub fn in_open(&self, dom: &DomainSpec) -> bool {
        self.atoms.iter().all(|(p, _)| dom.contains_open(*p))
    }

    /// Membership in X(closure of Omega).
    pub fn in_closure(&self, dom: &DomainSpec) -> bool {
        self.atoms.iter().all(|(p, _)| dom.contains_closure(*p))
    }

    /// Atoms moved to the nearest cell centres.
    pub fn snapped(&self, grid: &Grid2) -> Self {
        Self { atoms: self.atoms.iter().map(|(p, d)| (grid.snap_to_cell_center(*p), *d)).collect() }
    }

    /// Each charge `d` replaced by `|d|` unit charges of its sign, spaced
    /// `delta` apart on a segment (horizontal) centred at the original point.
    pub fn split_unit(&self, delta: f64) -> Self {
        let mut atoms = Vec::new();
        for (p, d) in &self.atoms {
            let n = d.unsigned_abs() as usize;
            for k in 0..n {
                let off = (k as f64 - 0.5 * (n as f64 - 1.0)) * delta;
                atoms.push(([p[0] + off, p[1]], d.signum()));
            }
        }
        Self { atoms }
    }

    /// Smallest distance between two atoms (infinite for fewer than two).
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (a, (p, _)) in self.atoms.iter().enumerate() {
            for (q, _) in &self.atoms[a + 1..] {
                m = m.min(dist(*p, *q));
            }
        }
        m
    }
}

/// Parameters of the recovery construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub mu: DiracSum,
    /// Radius of the balls around the atoms.
    pub r: f64,
    pub s: f64,
    /// Truncation radius of the cores, `1 - s` by default.
    pub core_radius: f64,
}

impl RecoveryConfig {
    pub fn new(mu: DiracSum, r: f64, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::OrderOutOfRange(s));
        }
        Ok(Self { mu, r, s, core_radius: 1.0 - s })
    }

    /// Largest admissible `r` for `mu` in `dom` (exclusive bound).
    pub fn max_radius(mu: &DiracSum, dom: &DomainSpec) -> f64 {
        let to_boundary = mu
            .atoms
            .iter()
            .map(|(p, _)| dom.omega_radius - dist(*p, dom.center))
            .fold(f64::INFINITY, f64::min);
        to_boundary.min(0.5 * mu.min_separation())
    }

    pub fn r_prime(&self) -> f64 {
        0.5 * self.r
    }

    pub fn r_dprime(&self) -> f64 {
        0.25 * self.r
    }

    pub fn validate(&self, dom: &DomainSpec) -> Result<()> {
        if self.mu.is_empty() {
            return Ok(());
        }
        if !self.mu.in_open(dom) {
            return Err(Error::InvalidInput("every atom must lie in the open domain".into()));
        }
        let max = Self::max_radius(&self.mu, dom);
        if !(self.r > 0.0 && self.r < max) {
            return Err(Error::InvalidInput(format!(
                "ball radius r = {} must lie in (0, {max}): below the distance to the boundary and half the atom separation",
                self.r
            )));
        }
        if !(self.core_radius > 0.0 && self.core_radius < self.r) {
            return Err(Error::InvalidInput(format!(
                "core radius {} must lie in (0, r = {})",
                self.core_radius, self.r
            )));
        }
        Ok(())
    }
}

#[inline]
fn cmul(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]]
}

/// `z^d` for a unit complex number (repeated products, conjugate for `d < 0`).
pub fn unit_power(z: [f64; 2], d: i64) -> [f64; 2] {
    let base = if d < 0 { [z[0], -z[1]] } else { z };
    let mut out = [1.0, 0.0];
    for _ in 0..d.unsigned_abs() {
        out = cmul(out, base);
    }
    out
}

/// `((x - c)/|x - c|)^d`; at `x = c` the limit along the positive x-axis, `(1, 0)`.
pub fn block_value(x: [f64; 2], center: [f64; 2], d: i64) -> [f64; 2] {
    let v = [x[0] - center[0], x[1] - center[1]];
    let r = v[0].hypot(v[1]);
    if r == 0.0 {
        return [1.0, 0.0];
    }
    unit_power([v[0] / r, v[1] / r], d)
}

fn whole_grid_radius(grid: &Grid2) -> f64 {
    dist(grid.origin, grid.center()) * (1.0 + 1e-12)
}

/// The vortex block of degree `d` at `center` over the whole grid.
pub fn build_block(center: [f64; 2], d: i64, grid: Grid2) -> Result<VectorField2> {
    if d == 0 {
        return Err(Error::InvalidInput("block degree must be nonzero".into()));
    }
    sample(|x| block_value(x, center, d), grid, whole_grid_radius(&grid))
}

/// Radius where the boundary datum starts to decay.
pub fn datum_taper_start(dom: &DomainSpec) -> f64 {
    dom.omega_radius + dom.band
}

/// Support radius of the boundary datum (about the domain centre).
pub fn datum_support(dom: &DomainSpec) -> f64 {
    dom.omega_radius + 3.0 * dom.band
}

/// Cosine cutoff: 1 up to `a`, 0 from `b`.
fn cutoff(r: f64, a: f64, b: f64) -> f64 {
    if r <= a {
        1.0
    } else if r >= b {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (r - a) / (b - a)).cos())
    }
}

/// `u_0(x) = ((x - c)/|x - c|)^{d0} chi(|x - c|)`: unit modulus on the closure of
/// Omega~, compactly supported.
pub fn boundary_datum_value(x: [f64; 2], dom: &DomainSpec, d0: i64) -> [f64; 2] {
    let chi = cutoff(dist(x, dom.center), datum_taper_start(dom), datum_support(dom));
    let z = block_value(x, dom.center, d0);
    [chi * z[0], chi * z[1]]
}

pub fn build_boundary_datum(dom: &DomainSpec, d0: i64) -> Result<VectorField2> {
    let support = datum_support(dom);
    let reach = dist(dom.center, dom.grid.center()) + support;
    let half = 0.5 * (dom.grid.nx.min(dom.grid.ny) - 1) as f64 * dom.grid.h;
    if reach > half {
        return Err(Error::InvalidInput("boundary datum support does not fit in the grid".into()));
    }
    let mut u = sample(|x| boundary_datum_value(x, dom, d0), dom.grid, reach)?;
    u.support_radius = reach;
    Ok(u)
}

/// Phase of `u_0 * prod conj(u_i)` outside Omega, continuous there when the
/// charges add up to `d0`.
fn exterior_phase(x: [f64; 2], dom: &DomainSpec, mu: &DiracSum) -> f64 {
    let z = [x[0] - dom.center[0], x[1] - dom.center[1]];
    let zz = z[0] * z[0] + z[1] * z[1];
    let mut phase = 0.0;
    for (p, d) in &mu.atoms {
        let w = [p[0] - dom.center[0], p[1] - dom.center[1]];
        // 1 - w / z
        let q = [1.0 - (w[0] * z[0] + w[1] * z[1]) / zz, -(w[1] * z[0] - w[0] * z[1]) / zz];
        phase -= *d as f64 * q[1].atan2(q[0]);
    }
    phase
}

/// Discrete harmonic extension of Dirichlet data into the Omega nodes
/// (5-point Laplacian, conjugate gradients to relative residual `1e-10`).
fn harmonic_phase(dom: &DomainSpec, data: impl Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    let g = dom.grid;
    let mask = &dom.omega_mask;
    let mut local = vec![usize::MAX; g.len()];
    let mut nodes = Vec::new();
    for (k, &m) in mask.iter().enumerate() {
        if m {
            local[k] = nodes.len();
            nodes.push(k);
        }
    }
    let n = nodes.len();
    let mut psi = vec![0.0; g.len()];
    for k in 0..g.len() {
        if !mask[k] {
            psi[k] = data(g.node_at(k));
        }
    }
    if n == 0 {
        return Ok(psi);
    }
    let neighbours = |k: usize| {
        let (i, j) = (k % g.nx, k / g.nx);
        [g.index(i - 1, j), g.index(i + 1, j), g.index(i, j - 1), g.index(i, j + 1)]
    };
    let mut b = vec![0.0; n];
    for (a, &k) in nodes.iter().enumerate() {
        for nb in neighbours(k) {
            if !mask[nb] {
                b[a] += psi[nb];
            }
        }
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for (a, &k) in nodes.iter().enumerate() {
            let mut v = 4.0 * x[a];
            for nb in neighbours(k) {
                if mask[nb] {
                    v -= x[local[nb]];
                }
            }
            out[a] = v;
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let bnorm = dot(&b, &b).sqrt().max(f64::MIN_POSITIVE);
    let mut rr = dot(&r, &r);
    let max_iter = 20 * n + 100;
    let mut it = 0;
    while rr.sqrt() > 1e-10 * bnorm {
        if it == max_iter {
            return Err(Error::SolverNotConverged { residual: rr.sqrt() / bnorm, iterations: it });
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
    }
    for (a, &k) in nodes.iter().enumerate() {
        psi[k] = x[a];
    }
    Ok(psi)
}

/// The glued map: `prod_i u_i * e^{i psi}` in Omega with `psi` the harmonic
/// phase correction, `u_0` elsewhere.
pub fn build_admissible(cfg: &RecoveryConfig, dom: &DomainSpec) -> Result<VectorField2> {
    cfg.validate(dom)?;
    let total = cfg.mu.total_degree();
    if total != dom.d0 {
        return Err(Error::DegreeConstraint { total, d0: dom.d0 });
    }
    let u0 = build_boundary_datum(dom, dom.d0)?;
    let psi = harmonic_phase(dom, |x| exterior_phase(x, dom, &cfg.mu))?;
    let g = dom.grid;
    let mut values = u0.values.clone();
    for k in 0..g.len() {
        if !dom.omega_mask[k] {
            continue;
        }
        let x = g.node_at(k);
        let mut v = [psi[k].cos(), psi[k].sin()];
        for (p, d) in &cfg.mu.atoms {
            v = cmul(v, block_value(x, *p, *d));
        }
        values[k] = v;
    }
    Ok(VectorField2 { grid: g, values, support_radius: u0.support_radius })
}

/// The S^1-valued competitor and its truncation `min(|x - x_i| / core, 1) u`.
#[derive(Debug, Clone)]
pub struct RecoveryPair {
    pub u: VectorField2,
    pub us: VectorField2,
}

/// `min_i min(|x - x_i| / core, 1)`.
pub fn core_profile(x: [f64; 2], mu: &DiracSum, core: f64) -> f64 {
    mu.atoms.iter().map(|(p, _)| (dist(x, *p) / core).min(1.0)).fold(1.0, f64::min)
}

pub fn build_recovery(cfg: &RecoveryConfig, dom: &DomainSpec) -> Result<RecoveryPair> {
    let u = build_admissible(cfg, dom)?;
    let g = u.grid;
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let f = core_profile(g.node_at(k), &cfg.mu, cfg.core_radius);
            [f * v[0], f * v[1]]
        })
        .collect();
    let us = VectorField2 { grid: g, values, support_radius: u.support_radius };
    Ok(RecoveryPair { u, us })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{check_s1_on, l2_norm};
    use crate::topology::{current, degree, degree_checked};

    fn domain(n: usize, d0: i64) -> DomainSpec {
        let g = Grid2::centered(4.0, n).unwrap();
        DomainSpec::disk(g, [0.0, 0.0], 1.0, 0.25, 4.0, d0).unwrap()
    }

    #[test]
    fn parse_atoms() {
        let mu = DiracSum::parse("(0,0):1; (0.5, -0.25):-2").unwrap();
        assert_eq!(mu.atoms, vec![([0.0, 0.0], 1), ([0.5, -0.25], -2)]);
        assert_eq!(mu.total_degree(), -1);
        assert_eq!(mu.total_variation(), 3);
        assert!(DiracSum::parse("(0,0):0").is_err());
        assert!(DiracSum::parse("(0,0)1").is_err());
        assert!(DiracSum::parse("").unwrap().is_empty());
    }

    #[test]
    fn split_keeps_charge() {
        let mu = DiracSum::new(vec![([0.1, 0.0], 3), ([-0.3, 0.2], -2)]).unwrap().split_unit(0.1);
        assert_eq!(mu.len(), 5);
        assert_eq!(mu.total_degree(), 1);
        assert_eq!(mu.total_variation(), 5);
        assert!((mu.min_separation() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn membership() {
        let dom = domain(32, 1);
        let edge = DiracSum::single([1.0, 0.0], 1).unwrap();
        assert!(!edge.in_open(&dom));
        assert!(edge.in_closure(&dom));
    }

    #[test]
    fn block_powers_and_degrees() {
        let g = Grid2::centered(4.0, 64).unwrap();
        let c = g.snap_to_cell_center([0.3, -0.2]);
        let one = build_block(c, 1, g).unwrap();
        for d in [-2i64, -1, 1, 2, 3] {
            let b = build_block(c, d, g).unwrap();
            for (v, w) in b.values.iter().zip(&one.values) {
                let p = unit_power(*w, d);
                assert!((v[0] - p[0]).abs() < 1e-12 && (v[1] - p[1]).abs() < 1e-12);
            }
            let rep = degree_checked(&b, &crate::field::circle_loop(c, 0.5, g.h)).unwrap();
            assert_eq!(rep.degree, d);
        }
        let m = build_block(c, -1, g).unwrap();
        for (v, w) in m.values.iter().zip(&one.values) {
            assert_eq!(*v, [w[0], -w[1]]);
        }
    }

    #[test]
    fn double_block_current() {
        let g = Grid2::centered(4.0, 128).unwrap();
        let c = g.snap_to_cell_center([0.0, 0.0]);
        let b = build_block(c, 2, g).unwrap();
        let j = current(&b);
        for k in 0..g.len() {
            let x = g.node_at(k);
            let r = dist(x, c);
            if r > 6.0 * g.h && r < 1.8 {
                let m = j[k][0].hypot(j[k][1]);
                assert!((m * r / 2.0 - 1.0).abs() < 0.05, "r = {r}: {m}");
            }
        }
    }

    #[test]
    fn boundary_datum_degrees() {
        for d0 in [0i64, 1, 3] {
            let dom = domain(64, d0);
            let u0 = build_boundary_datum(&dom, d0).unwrap();
            assert_eq!(degree(&u0, &dom.boundary_polyline).unwrap().degree, d0);
            let rep = check_s1_on(&u0, &dom.neighborhood_mask, 1e-12);
            assert!(rep.passes(), "{}", rep.max_modulus_error);
            assert!(u0.support_radius * 2.0 < dom.kernel_radius);
        }
        let dom = domain(32, 0);
        let u0 = build_boundary_datum(&dom, 0).unwrap();
        for (k, v) in u0.values.iter().enumerate() {
            assert!(v[1] == 0.0 && v[0] >= 0.0, "node {k}");
        }
    }

    #[test]
    fn centred_vortex_is_radial() {
        let dom = domain(64, 1);
        let c = dom.grid.snap_to_cell_center([0.0, 0.0]);
        let cfg = RecoveryConfig::new(DiracSum::single(c, 1).unwrap(), 0.5, 0.9).unwrap();
        let u = build_admissible(&cfg, &dom).unwrap();
        for k in 0..dom.grid.len() {
            if dom.omega_mask[k] {
                let e = block_value(dom.grid.node_at(k), c, 1);
                assert!((u.values[k][0] - e[0]).abs() < 1e-9 && (u.values[k][1] - e[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn admissible_degrees() {
        let dom = domain(96, 2);
        let g = dom.grid;
        let (a, b) = (g.snap_to_cell_center([-0.4, 0.1]), g.snap_to_cell_center([0.35, -0.2]));
        let cfg = RecoveryConfig::new(DiracSum::new(vec![(a, 1), (b, 1)]).unwrap(), 0.3, 0.95).unwrap();
        let u = build_admissible(&cfg, &dom).unwrap();
        assert_eq!(degree_checked(&u, &dom.boundary_polyline).unwrap().degree, 2);
        for p in [a, b] {
            assert_eq!(degree(&u, &crate::field::circle_loop(p, 0.2, g.h)).unwrap().degree, 1);
        }
        let rep = check_s1_on(&u, &dom.tilde_mask(), 1e-12);
        assert!(rep.passes(), "{}", rep.max_modulus_error);

        let dom0 = domain(96, 0);
        let cfg = RecoveryConfig::new(DiracSum::new(vec![(a, 1), (b, -1)]).unwrap(), 0.3, 0.95).unwrap();
        let u = build_admissible(&cfg, &dom0).unwrap();
        assert_eq!(degree(&u, &dom0.boundary_polyline).unwrap().degree, 0);
        assert_eq!(degree(&u, &crate::field::circle_loop(b, 0.2, g.h)).unwrap().degree, -1);
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let dom = domain(32, 1);
        let cfg = RecoveryConfig::new(DiracSum::new(vec![([0.0, 0.0], 2)]).unwrap(), 0.3, 0.9).unwrap();
        assert!(matches!(build_admissible(&cfg, &dom), Err(Error::DegreeConstraint { total: 2, d0: 1 })));
        let cfg = RecoveryConfig::new(DiracSum::single([0.0, 0.0], 1).unwrap(), 1.5, 0.9).unwrap();
        assert!(cfg.validate(&dom).is_err());
    }

    #[test]
    fn recovery_truncation() {
        let dom = domain(128, 1);
        let c = dom.grid.snap_to_cell_center([0.1, 0.0]);
        let mut prev = f64::INFINITY;
        for s in [0.9, 0.99] {
            let cfg = RecoveryConfig::new(DiracSum::single(c, 1).unwrap(), 0.5, s).unwrap();
            let pair = build_recovery(&cfg, &dom).unwrap();
            let g = dom.grid;
            for k in 0..g.len() {
                let x = g.node_at(k);
                if dist(x, c) >= cfg.core_radius {
                    assert_eq!(pair.u.values[k], pair.us.values[k]);
                } else {
                    let m = pair.us.values[k][0].hypot(pair.us.values[k][1]);
                    assert!((m - dist(x, c) / cfg.core_radius).abs() < 1e-12);
                }
            }
            let diff = VectorField2::combine(1.0, &pair.u, -1.0, &pair.us).unwrap();
            let e = l2_norm(&diff, None);
            assert!(e < prev);
            prev = e;
        }
    }
}
