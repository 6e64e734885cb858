//! Certified flat norms of signed measures on a grid region.
//!
//! A test function `phi` lives on the region's nodes; the Lipschitz condition
//! is imposed on the 8-neighbour edges, `|phi(a) - phi(b)| <= l |a - b|`.
//! Two unit balls are available:
//!
//! * [`FlatBall::Paper`]: `sup |phi| + Lip(phi) <= 1`, i.e. `|phi| <= 1 - l`;
//! * [`FlatBall::Simple`]: `sup |phi| <= 1` and `Lip(phi) <= 1`.
//!
//! For a fixed `l` the problem is the dual of an uncapacitated min-cost flow
//! with a reservoir; it is solved either exactly by successive shortest paths
//! or by a preconditioned primal–dual iteration with restarts. For the paper
//! ball `l` is optimised by cutting planes. Every reported value is
//! certified: a feasible `phi` (after Lipschitz repair) gives the lower
//! bound, and any edge flow `w` gives an upper bound through weak duality,
//! `l |w|_1 + (1 - l) |m - D^T w|_1`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::constants::FracParams;
use crate::error::{Error, Result};
use crate::field::{write_scalar_raster, DomainSpec, Grid2, ScalarField, VectorField2};
use crate::riesz::{potential, Normalization};
use crate::topology::{jacobian, JacobianField};
use crate::vortex::DiracSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatVariant {
    /// Test functions vanish on the region boundary.
    Open,
    /// Free boundary values.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatBall {
    #[default]
    Paper,
    Simple,
}

/// A measure `density * h^2` (per cell) plus `atom_weight * sum d_i delta_{x_i}`.
#[derive(Debug, Clone)]
pub struct FlatInput {
    pub grid: Grid2,
    /// One value per cell, `(nx - 1) * (ny - 1)`; empty for no density.
    pub density: Vec<f64>,
    pub atoms: DiracSum,
    pub atom_weight: f64,
    /// Node mask of the region.
    pub region: Vec<bool>,
    pub variant: FlatVariant,
    pub ball: FlatBall,
}

impl FlatInput {
    pub fn atoms_only(grid: Grid2, atoms: DiracSum, region: Vec<bool>, variant: FlatVariant) -> Self {
        Self { grid, density: Vec::new(), atoms, atom_weight: 1.0, region, variant, ball: FlatBall::Paper }
    }

    pub fn with_ball(mut self, ball: FlatBall) -> Self {
        self.ball = ball;
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.cell_area()
            + self.atom_weight * self.atoms.atoms.iter().map(|a| a.1 as f64).sum::<f64>()
    }

    /// Nodal masses: each cell's mass split equally among its corners, each
    /// atom bilinearly among the corners of its cell.
    pub fn node_masses(&self) -> Result<Vec<f64>> {
        let g = self.grid;
        let mut m = vec![0.0; g.len()];
        if !self.density.is_empty() {
            let cx = g.nx - 1;
            if self.density.len() != cx * (g.ny - 1) {
                return Err(Error::InvalidInput("density needs one value per cell".into()));
            }
            let a = g.cell_area();
            for (c, d) in self.density.iter().enumerate() {
                if !d.is_finite() {
                    return Err(Error::NonFinite { i: c % cx, j: c / cx });
                }
                let (i, j) = (c % cx, c / cx);
                let q = 0.25 * d * a;
                m[g.index(i, j)] += q;
                m[g.index(i + 1, j)] += q;
                m[g.index(i, j + 1)] += q;
                m[g.index(i + 1, j + 1)] += q;
            }
        }
        for &(p, d) in &self.atoms.atoms {
            let (i, j, tx, ty) = g
                .locate(p)
                .ok_or_else(|| Error::InvalidInput(format!("atom at {p:?} lies outside the grid")))?;
            let w = self.atom_weight * d as f64;
            m[g.index(i, j)] += w * (1.0 - tx) * (1.0 - ty);
            m[g.index(i + 1, j)] += w * tx * (1.0 - ty);
            m[g.index(i, j + 1)] += w * (1.0 - tx) * ty;
            m[g.index(i + 1, j + 1)] += w * tx * ty;
        }
        for (k, v) in m.iter().enumerate() {
            if *v != 0.0 && !self.region[k] {
                return Err(Error::InvalidInput(format!(
                    "measure charges node {:?} outside the region",
                    g.node_at(k)
                )));
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatNormResult {
    /// `<measure, phi>` for the returned feasible `phi` (a certified lower bound).
    pub value: f64,
    /// Certified upper bound, `value + primal_dual_gap`.
    pub upper_bound: f64,
    pub primal_dual_gap: f64,
    pub iterations: usize,
    /// Lipschitz bound `l` of `phi` (1 for the simple ball).
    pub lipschitz: f64,
    #[serde(skip)]
    pub phi: Option<ScalarField>,
}

impl FlatNormResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_phi<W: Write>(&self, out: W) -> Result<()> {
        match &self.phi {
            Some(p) => write_scalar_raster(out, p),
            None => Err(Error::InvalidInput("no test function stored".into())),
        }
    }
}

/// Solver for the fixed-`l` subproblems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatMethod {
    /// Exact min-cost flow by successive shortest paths; `phi` are the node potentials.
    #[default]
    Flow,
    /// Preconditioned primal–dual iteration with restarts.
    PrimalDual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Iteration budget (primal–dual steps or flow augmentations).
    pub max_iter: usize,
    pub method: FlatMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 400_000, method: FlatMethod::Flow }
    }
}

impl SolverOptions {
    pub fn primal_dual(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter, method: FlatMethod::PrimalDual }
    }
}

struct Graph {
    /// Grid index of each local node.
    nodes: Vec<usize>,
    /// (a, b, length) in local indices.
    edges: Vec<(usize, usize, f64)>,
    /// Nodes pinned to 0 (open variant).
    fixed: Vec<bool>,
    /// Incident edges per node: (edge, sign of D_{e, node}).
    incident: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    fn build(grid: Grid2, region: &[bool], variant: FlatVariant) -> Self {
        let mut local = vec![usize::MAX; grid.len()];
        let mut nodes = Vec::new();
        for (k, &r) in region.iter().enumerate() {
            if r {
                local[k] = nodes.len();
                nodes.push(k);
            }
        }
        let h = grid.h;
        let mut edges = Vec::new();
        let mut fixed = vec![false; nodes.len()];
        let offsets: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];
        for (a, &k) in nodes.iter().enumerate() {
            let (i, j) = ((k % grid.nx) as i64, (k / grid.nx) as i64);
            for (dx, dy) in offsets {
                let (p, q) = (i + dx, j + dy);
                if p < 0 || q < 0 || p >= grid.nx as i64 || q >= grid.ny as i64 {
                    continue;
                }
                let b = local[grid.index(p as usize, q as usize)];
                if b != usize::MAX {
                    let len = if dx != 0 && dy != 0 { h * std::f64::consts::SQRT_2 } else { h };
                    edges.push((a, b, len));
                }
            }
            if variant == FlatVariant::Open {
                let mut boundary = false;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (p, q) = (i + dx, j + dy);
                        if p < 0 || q < 0 || p >= grid.nx as i64 || q >= grid.ny as i64 {
                            boundary = true;
                        } else if !region[grid.index(p as usize, q as usize)] {
                            boundary = true;
                        }
                    }
                }
                fixed[a] = boundary;
            }
        }
        let mut incident = vec![Vec::new(); nodes.len()];
        for (e, &(a, b, len)) in edges.iter().enumerate() {
            incident[a].push((e, 1.0 / len));
            incident[b].push((e, -1.0 / len));
        }
        Self { nodes, edges, fixed, incident }
    }

    fn n(&self) -> usize {
        self.nodes.len()
    }

    /// `(D phi)_e = (phi_a - phi_b) / len`.
    fn apply_d(&self, phi: &[f64], out: &mut [f64]) {
        for (e, &(a, b, len)) in self.edges.iter().enumerate() {
            out[e] = (phi[a] - phi[b]) / len;
        }
    }

    fn apply_dt(&self, w: &[f64], out: &mut [f64]) {
        for (i, inc) in self.incident.iter().enumerate() {
            out[i] = inc.iter().map(|&(e, c)| c * w[e]).sum();
        }
    }

    /// Graph distance from the fixed nodes (infinite when there are none).
    fn dist_to_fixed(&self) -> Vec<f64> {
        let init: Vec<f64> = self.fixed.iter().map(|&f| if f { 0.0 } else { f64::INFINITY }).collect();
        self.envelope(&init, 1.0)
    }

    /// `min_y (f(y) + l d(x, y))` by multi-source Dijkstra.
    fn envelope(&self, f: &[f64], l: f64) -> Vec<f64> {
        let mut best = f.to_vec();
        let mut heap: BinaryHeap<Entry> = best
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| Entry(v, i))
            .collect();
        while let Some(Entry(d, i)) = heap.pop() {
            if d > best[i] {
                continue;
            }
            for &(e, _) in &self.incident[i] {
                let (a, b, len) = self.edges[e];
                let j = if a == i { b } else { a };
                let nd = d + l * len;
                if nd < best[j] {
                    best[j] = nd;
                    heap.push(Entry(nd, j));
                }
            }
        }
        best
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

struct Problem<'a> {
    g: &'a Graph,
    m: Vec<f64>,
    dist_fixed: Vec<f64>,
}

/// Solution of `max <m, phi>` over `|phi| <= a`, `|D phi| <= b`.
#[derive(Clone)]
struct Inner {
    phi: Vec<f64>,
    lb: f64,
    w: Vec<f64>,
    ub: f64,
    iterations: usize,
}

impl Problem<'_> {
    /// Best feasible test function near `phi`: Lipschitz envelopes, then the caps.
    fn repair(&self, phi: &[f64], a: f64, b: f64) -> (Vec<f64>, f64) {
        let lo = self.g.envelope(phi, b);
        let neg: Vec<f64> = phi.iter().map(|v| -v).collect();
        let hi: Vec<f64> = self.g.envelope(&neg, b).into_iter().map(|v| -v).collect();
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(p, q)| 0.5 * (p + q)).collect();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for cand in [lo, hi, mid] {
            let f: Vec<f64> = cand
                .iter()
                .zip(&self.dist_fixed)
                .map(|(&v, &d)| {
                    let cap = if d.is_finite() { a.min(b * d) } else { a };
                    v.clamp(-cap, cap)
                })
                .collect();
            let val = dot(&self.m, &f);
            if best.as_ref().map_or(true, |x| val > x.1) {
                best = Some((f, val));
            }
        }
        best.unwrap()
    }

    /// `(|t w|_1, |m - D^T t w|_1 over free nodes)` for the scale `t`.
    fn dual_parts(&self, w: &[f64], dtw: &[f64], t: f64) -> (f64, f64) {
        let flow = t * w.iter().map(|v| v.abs()).sum::<f64>();
        let res = self
            .m
            .iter()
            .zip(dtw)
            .zip(&self.g.fixed)
            .filter(|(_, &f)| !f)
            .map(|((m, d), _)| (m - t * d).abs())
            .sum();
        (flow, res)
    }

    /// Weak-duality bound `b |tw|_1 + a |m - D^T tw|_1`, minimised over `t`
    /// (convex, golden section on `[0, 2]`). Returns the bound and its parts.
    fn upper_bound(&self, w: &[f64], a: f64, b: f64) -> (f64, (f64, f64)) {
        let mut dtw = vec![0.0; self.g.n()];
        self.g.apply_dt(w, &mut dtw);
        let eval = |t: f64| {
            let (f, r) = self.dual_parts(w, &dtw, t);
            (b * f + a * r, (f, r))
        };
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        let mut c = hi - r * (hi - lo);
        let mut d = lo + r * (hi - lo);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..50 {
            if fc.0 < fd.0 {
                hi = d;
                d = c;
                fd = fc;
                c = hi - r * (hi - lo);
                fc = eval(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + r * (hi - lo);
                fd = eval(d);
            }
        }
        [eval(0.0), eval(1.0), fc, fd].into_iter().min_by(|x, y| x.0.total_cmp(&y.0)).unwrap()
    }

    fn solve_flow(&self, a: f64, b: f64, max_aug: usize) -> Inner {
        let g = self.g;
        let n = g.n();
        let mut fs = FlowSolver::new(g, a, b);
        let mut supply = self.m.clone();
        supply.push(-self.m.iter().sum::<f64>());
        let (pot, iterations) = fs.solve(&supply, max_aug);
        // y = -pot is dual feasible; phi_i = y_i - y_z
        let z = pot[n];
        let raw: Vec<f64> = pot[..n].iter().map(|p| z - p).collect();
        let (phi, lb) = self.repair(&raw, a, b);
        let w: Vec<f64> = (0..g.edges.len())
            .map(|e| (fs.flow[4 * e] - fs.flow[4 * e + 2]) * g.edges[e].2)
            .collect();
        let (ub, _) = self.upper_bound(&w, a, b);
        Inner { phi, lb, w, ub, iterations }
    }

    /// Preconditioned primal–dual iteration with adaptive restarts.
    fn solve_inner(&self, a: f64, b: f64, tol: f64, max_iter: usize, warm: Option<&Inner>) -> Inner {
        let g = self.g;
        let (n, ne) = (g.n(), g.edges.len());
        let tau: Vec<f64> = g
            .incident
            .iter()
            .zip(&g.fixed)
            .map(|(inc, &f)| {
                if f || inc.is_empty() {
                    0.0
                } else {
                    1.0 / inc.iter().map(|&(_, c)| c.abs()).sum::<f64>()
                }
            })
            .collect();
        let sigma: Vec<f64> = g.edges.iter().map(|&(_, _, len)| 0.5 * len).collect();
        // primal weight, rebalanced at every restart
        let mut omega: f64 = 1.0;
        let proj = |v: f64| v.clamp(-a, a);

        let (mut phi, mut w) = match warm {
            Some(s) => (s.phi.iter().map(|&v| proj(v)).collect::<Vec<_>>(), s.w.clone()),
            None => (vec![0.0; n], vec![0.0; ne]),
        };
        for (i, f) in g.fixed.iter().enumerate() {
            if *f {
                phi[i] = 0.0;
            }
        }
        let (mut avg_phi, mut avg_w) = (phi.clone(), w.clone());
        let mut avg_count = 0.0;
        let (p0, lb0) = self.repair(&phi, a, b);
        let (ub0, _) = self.upper_bound(&w, a, b);
        let mut best = Inner { phi: p0, lb: lb0, w: w.clone(), ub: ub0, iterations: 0 };
        let mut restart_gap = ub0 - lb0;
        let (mut anchor_phi, mut anchor_w) = (phi.clone(), w.clone());
        let mut dtw = vec![0.0; n];
        let mut dphi = vec![0.0; ne];
        let mut ext = vec![0.0; n];
        let check_every = 40;
        let mut it = 0;
        while it < max_iter && best.ub - best.lb > tol {
            it += 1;
            g.apply_dt(&w, &mut dtw);
            for i in 0..n {
                let old = phi[i];
                if tau[i] > 0.0 {
                    phi[i] = proj(phi[i] - tau[i] / omega * (dtw[i] - self.m[i]));
                }
                ext[i] = 2.0 * phi[i] - old;
            }
            g.apply_d(&ext, &mut dphi);
            for e in 0..ne {
                let s = sigma[e] * omega;
                let v = w[e] + s * dphi[e];
                w[e] = v.signum() * (v.abs() - s * b).max(0.0);
            }
            avg_count += 1.0;
            let f = 1.0 / avg_count;
            avg_phi.iter_mut().zip(&phi).for_each(|(x, y)| *x += (y - *x) * f);
            avg_w.iter_mut().zip(&w).for_each(|(x, y)| *x += (y - *x) * f);

            if it % check_every == 0 {
                let mut gaps = [0.0; 2];
                for (slot, (p, ww)) in [(&phi, &w), (&avg_phi, &avg_w)].into_iter().enumerate() {
                    let (rp, lb) = self.repair(p, a, b);
                    let (ub, _) = self.upper_bound(ww, a, b);
                    if lb > best.lb {
                        best.lb = lb;
                        best.phi = rp;
                    }
                    if ub < best.ub {
                        best.ub = ub;
                        best.w = ww.clone();
                    }
                    gaps[slot] = ub - lb;
                }
                let use_avg = gaps[1] < gaps[0];
                let gap = gaps[0].min(gaps[1]);
                if gap <= 0.3 * restart_gap || avg_count >= 10_000.0 {
                    if use_avg {
                        phi.clone_from(&avg_phi);
                        w.clone_from(&avg_w);
                    }
                    let dp = phi.iter().zip(&anchor_phi).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                    let dw = w.iter().zip(&anchor_w).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                    if dp > 1e-12 && dw > 1e-12 {
                        omega = (0.5 * (dw / dp).ln() + 0.5 * omega.ln()).exp();
                    }
                    anchor_phi.clone_from(&phi);
                    anchor_w.clone_from(&w);
                    avg_phi.clone_from(&phi);
                    avg_w.clone_from(&w);
                    avg_count = 0.0;
                    restart_gap = gap;
                }
            }
        }
        best.iterations = it;
        best
    }
}

/// Uncapacitated min-cost flow on the region graph plus a reservoir node `z`:
/// edge arcs cost `b len` each way, node-reservoir arcs cost `a` (0 on pinned
/// nodes). Its optimal potentials are the optimal test function.
struct FlowSolver {
    n: usize,
    head: Vec<usize>,
    to: Vec<usize>,
    cost: Vec<f64>,
    /// Flow on forward arcs (even ids); residual capacity of the reverse arcs.
    flow: Vec<f64>,
    next: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl FlowSolver {
    fn new(g: &Graph, a: f64, b: f64) -> Self {
        let n = g.n() + 1;
        let mut fs = Self { n, head: vec![NONE; n], to: Vec::new(), cost: Vec::new(), flow: Vec::new(), next: Vec::new() };
        for &(p, q, len) in &g.edges {
            fs.arc(p, q, b * len);
            fs.arc(q, p, b * len);
        }
        let z = n - 1;
        for i in 0..g.n() {
            let c = if g.fixed[i] { 0.0 } else { a };
            fs.arc(i, z, c);
            fs.arc(z, i, c);
        }
        fs
    }

    fn arc(&mut self, u: usize, v: usize, c: f64) {
        for (x, y, cc) in [(u, v, c), (v, u, -c)] {
            self.to.push(y);
            self.cost.push(cc);
            self.flow.push(0.0);
            self.next.push(self.head[x]);
            self.head[x] = self.to.len() - 1;
        }
    }

    fn residual(&self, e: usize) -> f64 {
        if e % 2 == 0 {
            f64::INFINITY
        } else {
            self.flow[e - 1]
        }
    }

    fn push(&mut self, e: usize, amount: f64) {
        if e % 2 == 0 {
            self.flow[e] += amount;
        } else {
            self.flow[e - 1] = (self.flow[e - 1] - amount).max(0.0);
        }
    }

    /// Routes the supplies; returns the potentials and the augmentation count.
    fn solve(&mut self, supply: &[f64], max_aug: usize) -> (Vec<f64>, usize) {
        let n = self.n;
        let scale = supply.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        let eps = 1e-13 * scale;
        let mut excess = supply.to_vec();
        let mut pot = vec![0.0; n];
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![NONE; n];
        let mut done = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut augs = 0;
        let mut source = 0;
        loop {
            while source < n && excess[source] <= eps {
                source += 1;
            }
            if source == n || augs >= max_aug {
                break;
            }
            for &v in &touched {
                dist[v] = f64::INFINITY;
                pred[v] = NONE;
                done[v] = false;
            }
            touched.clear();
            dist[source] = 0.0;
            touched.push(source);
            let mut heap = BinaryHeap::new();
            heap.push(Entry(0.0, source));
            let mut sink = NONE;
            let mut settled = Vec::new();
            while let Some(Entry(d, u)) = heap.pop() {
                if done[u] || d > dist[u] {
                    continue;
                }
                done[u] = true;
                settled.push(u);
                if excess[u] < -eps {
                    sink = u;
                    break;
                }
                let mut e = self.head[u];
                while e != NONE {
                    if self.residual(e) > 0.0 {
                        let v = self.to[e];
                        let rc = (self.cost[e] + pot[u] - pot[v]).max(0.0);
                        let nd = d + rc;
                        if nd < dist[v] {
                            if dist[v].is_infinite() {
                                touched.push(v);
                            }
                            dist[v] = nd;
                            pred[v] = e;
                            heap.push(Entry(nd, v));
                        }
                    }
                    e = self.next[e];
                }
            }
            if sink == NONE {
                // unreachable deficits: cannot happen with a reservoir
                break;
            }
            let dt = dist[sink];
            for &v in &settled {
                pot[v] += dist[v] - dt;
            }
            let mut amount = excess[source].min(-excess[sink]);
            let mut v = sink;
            while v != source {
                let e = pred[v];
                amount = amount.min(self.residual(e));
                v = self.to[e ^ 1];
            }
            let mut v = sink;
            while v != source {
                let e = pred[v];
                self.push(e, amount);
                v = self.to[e ^ 1];
            }
            excess[source] -= amount;
            excess[sink] += amount;
            augs += 1;
        }
        (pot, augs)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximiser of `min_k (l f_k + (1 - l) r_k)` over `l in [0, 1]`.
fn envelope_max(cuts: &[(f64, f64)]) -> (f64, f64) {
    let value = |l: f64| cuts.iter().map(|&(f, r)| l * f + (1.0 - l) * r).fold(f64::INFINITY, f64::min);
    let mut cands = vec![0.0, 1.0];
    for (i, &(f1, r1)) in cuts.iter().enumerate() {
        for &(f2, r2) in &cuts[i + 1..] {
            // l (f1 - r1) + r1 = l (f2 - r2) + r2
            let den = (f1 - r1) - (f2 - r2);
            if den != 0.0 {
                let l = (r2 - r1) / den;
                if (0.0..=1.0).contains(&l) {
                    cands.push(l);
                }
            }
        }
    }
    cands.into_iter().map(|l| (l, value(l))).max_by(|x, y| x.1.total_cmp(&y.1)).unwrap()
}

/// Certified flat norm; the gap `upper_bound - value` is at most `opts.tol`.
///
/// For the paper ball the Lipschitz bound `l` is optimised by a cutting-plane
/// search: every dual flow `w` yields the affine bound
/// `l |w|_1 + (1 - l) |m - D^T w|_1` valid for all `l`.
pub fn flat_norm(input: &FlatInput, opts: SolverOptions) -> Result<FlatNormResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if input.region.len() != input.grid.len() {
        return Err(Error::InvalidInput("region mask size differs from the grid".into()));
    }
    let masses = input.node_masses()?;
    let g = Graph::build(input.grid, &input.region, input.variant);
    let m: Vec<f64> = g.nodes.iter().map(|&k| masses[k]).collect();
    let n = g.n();
    let prob = Problem { g: &g, m, dist_fixed: g.dist_to_fixed() };
    let to_field = |phi: &[f64]| {
        let mut values = vec![0.0; input.grid.len()];
        for (a, &k) in g.nodes.iter().enumerate() {
            values[k] = phi[a];
        }
        ScalarField { grid: input.grid, values }
    };
    if n == 0 || prob.m.iter().all(|&v| v == 0.0) {
        return Ok(FlatNormResult {
            value: 0.0,
            upper_bound: 0.0,
            primal_dual_gap: 0.0,
            iterations: 0,
            lipschitz: 0.0,
            phi: Some(to_field(&vec![0.0; n])),
        });
    }
    let finish = |phi: &[f64], lb: f64, ub: f64, iterations: usize, l: f64| {
        let gap = (ub - lb).max(0.0);
        if gap > opts.tol {
            return Err(Error::FlatNormNotConverged { best_value: lb, gap });
        }
        Ok(FlatNormResult { value: lb, upper_bound: lb + gap, primal_dual_gap: gap, iterations, lipschitz: l, phi: Some(to_field(phi)) })
    };

    let solve = |a: f64, b: f64, tol: f64, budget: usize, warm: Option<&Inner>| match opts.method {
        FlatMethod::Flow => prob.solve_flow(a, b, budget),
        FlatMethod::PrimalDual => prob.solve_inner(a, b, tol, budget, warm),
    };
    if input.ball == FlatBall::Simple {
        let s = solve(1.0, 1.0, opts.tol, opts.max_iter, None);
        return finish(&s.phi, s.lb, s.ub, s.iterations, 1.0);
    }

    let free_mass: f64 = prob.m.iter().zip(&g.fixed).filter(|(_, &f)| !f).map(|(v, _)| v.abs()).sum();
    let mut cuts = vec![(0.0, free_mass)];
    let mut best: Option<(Inner, f64)> = None;
    let mut iterations = 0;
    let mut solved: Vec<(f64, Inner)> = Vec::new();
    for _ in 0..80 {
        let (l, upper) = envelope_max(&cuts);
        let lb = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0.lb);
        if upper - lb <= opts.tol || iterations >= opts.max_iter {
            break;
        }
        let warm = solved
            .iter()
            .min_by(|x, y| (x.0 - l).abs().total_cmp(&(y.0 - l).abs()))
            .map(|x| &x.1);
        let inner_tol = 0.25 * opts.tol;
        let s = solve(1.0 - l, l, inner_tol, opts.max_iter - iterations, warm);
        iterations += s.iterations;
        let (_, (f, r)) = prob.upper_bound(&s.w, 1.0 - l, l);
        cuts.push((f, r));
        // the flow at its own scale is a valid cut as well
        let (_, (f1, r1)) = {
            let mut dtw = vec![0.0; n];
            g.apply_dt(&s.w, &mut dtw);
            (0.0, prob.dual_parts(&s.w, &dtw, 1.0))
        };
        cuts.push((f1, r1));
        if best.as_ref().map_or(true, |b| s.lb > b.0.lb) {
            best = Some((s.clone(), l));
        }
        solved.push((l, s));
    }
    let (upper, _) = {
        let (_, u) = envelope_max(&cuts);
        (u, ())
    };
    let (b, l) = best.expect("at least one inner solve");
    finish(&b.phi, b.lb, upper, iterations, l)
}

/// Cell-by-cell aggregation of a Jacobian onto a grid coarser by `factor`.
pub fn coarsen_density(j: &JacobianField, keep_cell: impl Fn([f64; 2]) -> bool, factor: usize) -> Result<(Grid2, Vec<f64>)> {
    let fine = j.grid;
    let factor = factor.max(1);
    let ncx = (fine.nx - 1) / factor + 1;
    let ncy = (fine.ny - 1) / factor + 1;
    let coarse = Grid2::new(fine.origin, fine.h * factor as f64, ncx, ncy)?;
    let (cx, ccx, ccy) = (j.cells_x(), ncx - 1, ncy - 1);
    let mut mass = vec![0.0; ccx * ccy];
    for c in 0..j.values.len() {
        if !keep_cell(j.cell_center(c)) {
            continue;
        }
        let (i, jj) = (c % cx, c / cx);
        let (a, b) = ((i / factor).min(ccx - 1), (jj / factor).min(ccy - 1));
        mass[b * ccx + a] += j.values[c] * fine.cell_area();
    }
    let density = mass.into_iter().map(|v| v / coarse.cell_area()).collect();
    Ok((coarse, density))
}

/// Node region made of the corners of the cells whose centres satisfy `keep`.
pub fn region_from_cells(grid: Grid2, keep: impl Fn([f64; 2]) -> bool) -> Vec<bool> {
    let mut r = vec![false; grid.len()];
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let p = grid.node(i, j);
            if keep([p[0] + 0.5 * grid.h, p[1] + 0.5 * grid.h]) {
                for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    r[grid.index(a, b)] = true;
                }
            }
        }
    }
    r
}

/// Options for Jacobian-to-Dirac distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatDistanceOptions {
    pub coarsen: usize,
    pub solver: SolverOptions,
    pub ball: FlatBall,
}

impl Default for FlatDistanceOptions {
    fn default() -> Self {
        Self { coarsen: 4, solver: SolverOptions::default(), ball: FlatBall::Paper }
    }
}

/// `|| J(v) - pi mu ||_flat` over the closed domain, `v` any field on the grid.
pub fn flat_distance_field_to_dirac(v: &VectorField2, mu: &DiracSum, dom: &DomainSpec, opts: FlatDistanceOptions) -> Result<FlatNormResult> {
    let jac = jacobian(v);
    let slack = 1e-9;
    let keep = |p: [f64; 2]| crate::field::dist(p, dom.center) <= dom.omega_radius + slack;
    let (coarse, density) = coarsen_density(&jac, keep, opts.coarsen)?;
    let ccx = coarse.nx - 1;
    let mut region = vec![false; coarse.len()];
    for (c, d) in density.iter().enumerate() {
        let (i, j) = (c % ccx, c / ccx);
        let p = coarse.node(i, j);
        let centre = [p[0] + 0.5 * coarse.h, p[1] + 0.5 * coarse.h];
        if *d != 0.0 || keep(centre) {
            for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                region[coarse.index(a, b)] = true;
            }
        }
    }
    let input = FlatInput {
        grid: coarse,
        density,
        atoms: mu.clone(),
        atom_weight: -std::f64::consts::PI,
        region,
        variant: FlatVariant::Closed,
        ball: opts.ball,
    };
    flat_norm(&input, opts.solver)
}

/// `|| J(I~_{1-s} u) - pi mu ||_flat` over the closed domain.
pub fn flat_distance_jacobian_to_dirac(
    u: &VectorField2,
    params: &FracParams,
    mu: &DiracSum,
    dom: &DomainSpec,
    opts: FlatDistanceOptions,
) -> Result<FlatNormResult> {
    let v = potential(u, params, Normalization::Normalized)?;
    flat_distance_field_to_dirac(&v, mu, dom, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize, side: f64) -> Grid2 {
        Grid2::new([0.0, 0.0], side / (n - 1) as f64, n, n).unwrap()
    }

    #[test]
    fn zero_measure() {
        let g = square(8, 1.0);
        let inp = FlatInput::atoms_only(g, DiracSum::default(), vec![true; g.len()], FlatVariant::Closed);
        let r = flat_norm(&inp, SolverOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.primal_dual_gap, 0.0);
    }

    #[test]
    fn single_atom_closed_is_one() {
        let g = square(16, 1.5);
        for ball in [FlatBall::Paper, FlatBall::Simple] {
            let mu = DiracSum::new(vec![([0.71, 0.52], 1)]).unwrap();
            let inp = FlatInput::atoms_only(g, mu, vec![true; g.len()], FlatVariant::Closed).with_ball(ball);
            let r = flat_norm(&inp, SolverOptions::default()).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6, "{ball:?}: {}", r.value);
            assert!(r.primal_dual_gap <= 1e-6);
        }
    }

    #[test]
    fn dipole_simple_ball_is_graph_distance() {
        let g = square(16, 1.5);
        let h = g.h;
        let x = g.node(3, 4);
        for (dx, dy) in [(2usize, 0usize), (5, 3), (10, 10)] {
            let y = g.node(3 + dx, 4 + dy);
            let d = (dx.max(dy) - dx.min(dy)) as f64 * h + dx.min(dy) as f64 * h * std::f64::consts::SQRT_2;
            let mu = DiracSum::new(vec![(x, 1), (y, -1)]).unwrap();
            let inp = FlatInput::atoms_only(g, mu.clone(), vec![true; g.len()], FlatVariant::Closed).with_ball(FlatBall::Simple);
            let r = flat_norm(&inp, SolverOptions::default()).unwrap();
            assert!((r.value - d.min(2.0)).abs() < 1e-6, "simple {} vs {}", r.value, d);
            let inp = FlatInput::atoms_only(g, mu, vec![true; g.len()], FlatVariant::Closed);
            let r = flat_norm(&inp, SolverOptions::default()).unwrap();
            assert!((r.value - 2.0 * d / (2.0 + d)).abs() < 1e-6, "paper {} vs {}", r.value, 2.0 * d / (2.0 + d));
        }
    }

    #[test]
    fn open_variant_pins_boundary() {
        let g = square(16, 1.5);
        let mu = DiracSum::new(vec![(g.node(7, 7), 1)]).unwrap();
        let closed = flat_norm(&FlatInput::atoms_only(g, mu.clone(), vec![true; g.len()], FlatVariant::Closed), SolverOptions::default()).unwrap();
        let open = flat_norm(&FlatInput::atoms_only(g, mu, vec![true; g.len()], FlatVariant::Open), SolverOptions::default()).unwrap();
        assert!(open.value <= closed.value + 1e-6);
        let phi = open.phi.unwrap();
        for i in 0..16 {
            assert_eq!(phi.values[g.index(i, 0)], 0.0);
            assert_eq!(phi.values[g.index(0, i)], 0.0);
        }
        // phi <= min(1 - l, l d) at graph distance d = 7h from the pinned ring
        let d = 7.0 * g.h;
        assert!((open.value - d / (1.0 + d)).abs() < 1e-6, "{}", open.value);
    }

    #[test]
    fn primal_dual_matches_flow() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = square(10, 1.0);
        for variant in [FlatVariant::Closed, FlatVariant::Open] {
            for ball in [FlatBall::Simple, FlatBall::Paper] {
                let density: Vec<f64> = (0..81).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let inp = FlatInput {
                    grid: g,
                    density,
                    atoms: DiracSum::default(),
                    atom_weight: 1.0,
                    region: vec![true; g.len()],
                    variant,
                    ball,
                };
                let exact = flat_norm(&inp, SolverOptions::default()).unwrap();
                let pd = flat_norm(&inp, SolverOptions::primal_dual(1e-6, 2_000_000)).unwrap();
                assert!((exact.value - pd.value).abs() < 2e-6, "{variant:?} {ball:?}: {} vs {}", exact.value, pd.value);
                assert!(exact.primal_dual_gap <= 1e-9);
            }
        }
    }
}
