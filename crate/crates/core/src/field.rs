//! Uniform grids, sampled planar fields and domain geometry.
//!
//! Nodes are stored row-major: index `j * nx + i` holds node `(i, j)` at
//! `origin + (i h, j h)`. Reductions run in that order, row by row, so every
//! result is independent of the thread count.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(origin: [f64; 2], h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {h}")));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2x2 nodes, got {nx}x{ny}")));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidInput("non-finite grid origin".into()));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Square `n x n` grid of side `side` whose nodes are symmetric about 0.
    ///
    /// Uses `h = side / n`; for even `n` the point 0 is a cell centre.
    pub fn centered(side: f64, n: usize) -> Result<Self> {
        let h = side / n as f64;
        let o = -0.5 * (n as f64 - 1.0) * h;
        Self::new([o, o], h, n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    #[inline]
    pub fn node_at(&self, k: usize) -> [f64; 2] {
        self.node(k % self.nx, k / self.nx)
    }

    pub fn center(&self) -> [f64; 2] {
        [
            self.origin[0] + 0.5 * (self.nx as f64 - 1.0) * self.h,
            self.origin[1] + 0.5 * (self.ny as f64 - 1.0) * self.h,
        ]
    }

    /// Cell area `h^2`, the midpoint quadrature weight.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Cell containing `p` and the local coordinates in `[0, 1]^2`.
    ///
    /// Returns `None` when `p` lies outside the node hull.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
        // nodes reproduce their own values exactly
        let snap = |f: f64| if (f - f.round()).abs() <= 1e-9 { f.round() } else { f };
        let fx = snap((p[0] - self.origin[0]) / self.h);
        let fy = snap((p[1] - self.origin[1]) / self.h);
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (self.nx - 1) as f64 && fy <= (self.ny - 1) as f64) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Point snapped to the nearest cell centre, so that no node coincides with it.
    pub fn snap_to_cell_center(&self, p: [f64; 2]) -> [f64; 2] {
        let snap = |x: f64, o: f64| o + ((x - o) / self.h - 0.5).round() * self.h + 0.5 * self.h;
        [snap(p[0], self.origin[0]), snap(p[1], self.origin[1])]
    }

    /// Same geometry with spacing `h/2` (doubles the node count per side).
    pub fn refined(&self) -> Self {
        let h = 0.5 * self.h;
        let c = self.center();
        let nx = 2 * self.nx;
        let ny = 2 * self.ny;
        Self {
            origin: [c[0] - 0.5 * (nx as f64 - 1.0) * h, c[1] - 0.5 * (ny as f64 - 1.0) * h],
            h,
            nx,
            ny,
        }
    }

    /// Per-node predicate.
    pub fn mask(&self, f: impl Fn([f64; 2]) -> bool) -> Vec<bool> {
        (0..self.len()).map(|k| f(self.node_at(k))).collect()
    }
}

/// Real scalar samples on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// `h^2 * sum` over the masked nodes.
    pub fn integrate(&self, mask: Option<&[bool]>) -> f64 {
        masked_sum(self.grid, mask, |k| self.values[k]) * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// An R^2-valued field sampled on grid nodes, vanishing outside a disk
/// of radius `support_radius` about the grid centre.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    pub grid: Grid2,
    pub values: Vec<[f64; 2]>,
    pub support_radius: f64,
}

impl VectorField2 {
    pub fn zeros(grid: Grid2) -> Self {
        Self { grid, values: vec![[0.0; 2]; grid.len()], support_radius: 0.0 }
    }

    /// Wraps raw node values; rejects non-finite entries and enforces the support.
    pub fn from_values(grid: Grid2, mut values: Vec<[f64; 2]>, support_radius: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} node values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let c = grid.center();
        for (k, v) in values.iter_mut().enumerate() {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::NonFinite { i: k % grid.nx, j: k / grid.nx });
            }
            let p = grid.node_at(k);
            if dist(p, c) > support_radius {
                *v = [0.0, 0.0];
            }
        }
        Ok(Self { grid, values, support_radius })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[self.grid.index(i, j)]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn modulus(&self) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|v| norm(*v)).collect() }
    }

    /// `max |u|` over all nodes (equivalently over the support).
    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(norm(*v)))
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| [lambda * v[0], lambda * v[1]]).collect(),
            support_radius: self.support_radius,
        }
    }

    /// `a u + b v` on a shared grid.
    pub fn combine(a: f64, u: &Self, b: f64, v: &Self) -> Result<Self> {
        if u.grid != v.grid {
            return Err(Error::InvalidInput("fields live on different grids".into()));
        }
        Ok(Self {
            grid: u.grid,
            values: u
                .values
                .iter()
                .zip(&v.values)
                .map(|(p, q)| [a * p[0] + b * q[0], a * p[1] + b * q[1]])
                .collect(),
            support_radius: u.support_radius.max(v.support_radius),
        })
    }

    /// Bilinear interpolation at an arbitrary point (zero outside the node hull).
    pub fn interpolate(&self, p: [f64; 2]) -> [f64; 2] {
        match self.grid.locate(p) {
            None => [0.0, 0.0],
            Some((i, j, tx, ty)) => {
                let a = self.at(i, j);
                let b = self.at(i + 1, j);
                let c = self.at(i, j + 1);
                let d = self.at(i + 1, j + 1);
                let w = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
                [
                    w[0] * a[0] + w[1] * b[0] + w[2] * c[0] + w[3] * d[0],
                    w[0] * a[1] + w[1] * b[1] + w[2] * c[1] + w[3] * d[1],
                ]
            }
        }
    }

    /// Discrete Dirichlet integral `h^2 sum |grad u|^2` with centred
    /// differences (one-sided on the grid boundary).
    pub fn dirichlet_integral(&self, mask: Option<&[bool]>) -> f64 {
        let g = self.grid;
        masked_sum(g, mask, |k| {
            let (i, j) = (k % g.nx, k / g.nx);
            let gr = node_gradient(self, i, j);
            gr[0][0] * gr[0][0] + gr[0][1] * gr[0][1] + gr[1][0] * gr[1][0] + gr[1][1] * gr[1][1]
        }) * g.cell_area()
    }
}

/// Nodewise evaluation of a closed-form map, zeroed outside `support_radius`.
pub fn sample(
    f: impl Fn([f64; 2]) -> [f64; 2],
    grid: Grid2,
    support_radius: f64,
) -> Result<VectorField2> {
    let c = grid.center();
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let p = grid.node_at(k);
        if dist(p, c) > support_radius {
            values.push([0.0, 0.0]);
            continue;
        }
        let v = f(p);
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::NonFinite { i: k % grid.nx, j: k / grid.nx });
        }
        values.push(v);
    }
    Ok(VectorField2 { grid, values, support_radius })
}

/// Midpoint quadrature of `int |u|^2` over the masked nodes.
pub fn l2_norm(u: &VectorField2, mask: Option<&[bool]>) -> f64 {
    masked_sum(u.grid, mask, |k| {
        let v = u.values[k];
        v[0] * v[0] + v[1] * v[1]
    }) * u.grid.cell_area()
}

/// Row-ordered sum of `f(k)` over masked nodes.
pub(crate) fn masked_sum(grid: Grid2, mask: Option<&[bool]>, f: impl Fn(usize) -> f64) -> f64 {
    let mut total = 0.0;
    for j in 0..grid.ny {
        let mut row = 0.0;
        for i in 0..grid.nx {
            let k = grid.index(i, j);
            if mask.map_or(true, |m| m[k]) {
                row += f(k);
            }
        }
        total += row;
    }
    total
}

/// `grad[a][b] = d u_a / d x_b` at node `(i, j)`.
pub(crate) fn node_gradient(u: &VectorField2, i: usize, j: usize) -> [[f64; 2]; 2] {
    let g = u.grid;
    let (dx0, dx1, sx) = stencil(i, g.nx, g.h);
    let (dy0, dy1, sy) = stencil(j, g.ny, g.h);
    let px = u.at(dx1, j);
    let mx = u.at(dx0, j);
    let py = u.at(i, dy1);
    let my = u.at(i, dy0);
    [
        [(px[0] - mx[0]) / sx, (py[0] - my[0]) / sy],
        [(px[1] - mx[1]) / sx, (py[1] - my[1]) / sy],
    ]
}

/// Centred difference stencil, one-sided at the ends: (lo, hi, spacing).
#[inline]
pub(crate) fn stencil(i: usize, n: usize, h: f64) -> (usize, usize, f64) {
    if i == 0 {
        (0, 1, h)
    } else if i == n - 1 {
        (n - 2, n - 1, h)
    } else {
        (i - 1, i + 1, 2.0 * h)
    }
}

#[inline]
pub(crate) fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

#[inline]
pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closed counterclockwise polygon approximating a circle with spacing at most `max_spacing`.
pub fn circle_loop(center: [f64; 2], radius: f64, max_spacing: f64) -> Vec<[f64; 2]> {
    let n = ((2.0 * std::f64::consts::PI * radius / max_spacing).ceil() as usize).max(16);
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

/// The sets Omega, U, Omega~ = Omega u U and the data tied to them.
///
/// Omega is a disk; U is the annulus of half-width `band` around its boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub grid: Grid2,
    pub center: [f64; 2],
    pub omega_radius: f64,
    pub band: f64,
    pub omega_mask: Vec<bool>,
    pub neighborhood_mask: Vec<bool>,
    pub boundary_polyline: Vec<[f64; 2]>,
    pub kernel_radius: f64,
    pub d0: i64,
}

impl DomainSpec {
    pub fn disk(
        grid: Grid2,
        center: [f64; 2],
        omega_radius: f64,
        band: f64,
        kernel_radius: f64,
        d0: i64,
    ) -> Result<Self> {
        if !(omega_radius > 0.0 && band > 0.0 && band < omega_radius) {
            return Err(Error::InvalidInput(format!(
                "need 0 < band < omega_radius, got band {band}, radius {omega_radius}"
            )));
        }
        if !(kernel_radius > 0.0) {
            return Err(Error::InvalidInput("kernel radius must be positive".into()));
        }
        // Omega~ plus one cell must sit strictly inside the node hull.
        let lo = [grid.origin[0], grid.origin[1]];
        let hi = grid.node(grid.nx - 1, grid.ny - 1);
        let reach = omega_radius + band + grid.h;
        if center[0] - reach < lo[0] || center[1] - reach < lo[1] || center[0] + reach > hi[0] || center[1] + reach > hi[1] {
            return Err(Error::InvalidInput("domain does not fit in the grid interior".into()));
        }
        let omega_mask = grid.mask(|p| dist(p, center) < omega_radius);
        let neighborhood_mask = grid.mask(|p| (dist(p, center) - omega_radius).abs() < band);
        Ok(Self {
            grid,
            center,
            omega_radius,
            band,
            omega_mask,
            neighborhood_mask,
            boundary_polyline: circle_loop(center, omega_radius, grid.h),
            kernel_radius,
            d0,
        })
    }

    /// Omega~ = Omega u U.
    pub fn tilde_mask(&self) -> Vec<bool> {
        self.omega_mask.iter().zip(&self.neighborhood_mask).map(|(a, b)| *a || *b).collect()
    }

    /// Nodes of the closed set Omega_t = {dist(x, Omega) <= t}.
    pub fn dilated_mask(&self, t: f64) -> Vec<bool> {
        self.grid.mask(|p| dist(p, self.center) <= self.omega_radius + t)
    }

    /// Boundary loop of Omega_t.
    pub fn dilated_loop(&self, t: f64) -> Vec<[f64; 2]> {
        circle_loop(self.center, self.omega_radius + t, self.grid.h)
    }

    /// sup { t : Omega_t inside Omega~ }.
    pub fn t0(&self) -> f64 {
        self.band
    }

    pub fn contains_closure(&self, p: [f64; 2]) -> bool {
        dist(p, self.center) <= self.omega_radius
    }

    pub fn contains_open(&self, p: [f64; 2]) -> bool {
        dist(p, self.center) < self.omega_radius
    }

    /// Checks `R > diam(supp u)`.
    pub fn validate_field(&self, u: &VectorField2) -> Result<()> {
        if u.grid != self.grid {
            return Err(Error::InvalidInput("field and domain use different grids".into()));
        }
        let diameter = 2.0 * u.support_radius;
        if !(self.kernel_radius > diameter) {
            return Err(Error::KernelRadiusTooSmall { radius: self.kernel_radius, diameter });
        }
        Ok(())
    }

    /// CSV export of the masks for plotting.
    pub fn write_mask_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,x,y,omega,neighborhood")?;
        for k in 0..self.grid.len() {
            let (i, j) = (k % self.grid.nx, k / self.grid.nx);
            let p = self.grid.node(i, j);
            writeln!(
                out,
                "{i},{j},{},{},{},{}",
                p[0],
                p[1],
                self.omega_mask[k] as u8,
                self.neighborhood_mask[k] as u8
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S1Report {
    pub max_modulus_error: f64,
    pub offending_nodes: Vec<(usize, usize)>,
    pub tol: f64,
}

impl S1Report {
    pub fn passes(&self) -> bool {
        self.max_modulus_error <= self.tol
    }
}

/// Worst violation of `| |u| - 1 |` over the Omega nodes.
pub fn check_s1_constraint(u: &VectorField2, dom: &DomainSpec, tol: f64) -> S1Report {
    check_s1_on(u, &dom.omega_mask, tol)
}

/// [`check_s1_constraint`] over an arbitrary mask.
pub fn check_s1_on(u: &VectorField2, mask: &[bool], tol: f64) -> S1Report {
    let mut worst: f64 = 0.0;
    let mut offending = Vec::new();
    for (k, v) in u.values.iter().enumerate() {
        if !mask[k] {
            continue;
        }
        let e = (norm(*v) - 1.0).abs();
        worst = worst.max(e);
        if e > tol {
            offending.push((k % u.grid.nx, k / u.grid.nx));
        }
    }
    S1Report { max_modulus_error: worst, offending_nodes: offending, tol }
}

/// A raster read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub grid: Grid2,
    pub channels: usize,
    pub data: Vec<f64>,
}

/// Writes the `VF2` raster: five ASCII header lines (magic, nx, ny, h, origin)
/// then row-major little-endian f64 values, `channels` per node.
pub fn write_raster<W: Write>(mut out: W, grid: Grid2, channels: usize, data: &[f64]) -> Result<()> {
    if data.len() != grid.len() * channels {
        return Err(Error::InvalidInput("raster data length mismatch".into()));
    }
    writeln!(out, "VF2")?;
    writeln!(out, "{}", grid.nx)?;
    writeln!(out, "{}", grid.ny)?;
    writeln!(out, "{:?}", grid.h)?;
    writeln!(out, "{:?} {:?}", grid.origin[0], grid.origin[1])?;
    for v in data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_vector_raster<W: Write>(out: W, u: &VectorField2) -> Result<()> {
    let flat: Vec<f64> = u.values.iter().flat_map(|v| [v[0], v[1]]).collect();
    write_raster(out, u.grid, 2, &flat)
}

pub fn write_scalar_raster<W: Write>(out: W, f: &ScalarField) -> Result<()> {
    write_raster(out, f.grid, 1, &f.values)
}

pub fn read_raster<R: BufRead>(mut input: R) -> Result<Raster> {
    let mut line = String::new();
    let mut next = |what: &str| -> Result<String> {
        line.clear();
        input.read_line(&mut line)?;
        let t = line.trim().to_string();
        if t.is_empty() {
            return Err(Error::InvalidInput(format!("raster header: missing {what}")));
        }
        Ok(t)
    };
    let bad = |what: &str| Error::InvalidInput(format!("raster header: bad {what}"));
    if next("magic")? != "VF2" {
        return Err(bad("magic"));
    }
    let nx: usize = next("nx")?.parse().map_err(|_| bad("nx"))?;
    let ny: usize = next("ny")?.parse().map_err(|_| bad("ny"))?;
    let h: f64 = next("h")?.parse().map_err(|_| bad("h"))?;
    let o = next("origin")?;
    let mut it = o.split_whitespace().map(|t| t.parse::<f64>());
    let ox = it.next().and_then(|r| r.ok()).ok_or_else(|| bad("origin"))?;
    let oy = it.next().and_then(|r| r.ok()).ok_or_else(|| bad("origin"))?;
    let grid = Grid2::new([ox, oy], h, nx, ny)?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % (8 * grid.len()) != 0 || bytes.is_empty() {
        return Err(Error::InvalidInput("raster payload size mismatch".into()));
    }
    let channels = bytes.len() / (8 * grid.len());
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Raster { grid, channels, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2 {
        Grid2::centered(4.0, n).unwrap()
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid2::new([0.0, 0.0], 0.0, 4, 4).is_err());
        assert!(Grid2::new([0.0, 0.0], 0.1, 1, 4).is_err());
        let g = grid(8);
        assert_eq!(g.node(0, 0), g.origin);
        assert!((g.center()[0]).abs() < 1e-15);
    }

    #[test]
    fn constant_field_is_zero_outside_support() {
        let g = grid(32);
        let u = sample(|_| [1.0, 0.0], g, 1.0).unwrap();
        for k in 0..g.len() {
            let inside = dist(g.node_at(k), g.center()) <= 1.0;
            assert_eq!(u.values[k], if inside { [1.0, 0.0] } else { [0.0, 0.0] });
        }
    }

    #[test]
    fn radial_unit_field_has_unit_modulus() {
        let g = grid(32);
        let u = sample(|p| { let r = p[0].hypot(p[1]); [p[0] / r, p[1] / r] }, g, 10.0).unwrap();
        assert!(u.values.iter().all(|v| (norm(*v) - 1.0).abs() < 1e-15));
    }

    #[test]
    fn gaussian_peak_at_centre_node() {
        let g = Grid2::new([-2.0, -2.0], 4.0 / 128.0, 129, 129).unwrap();
        let u = sample(|p| [(-(p[0] * p[0] + p[1] * p[1])).exp(), 0.0], g, 10.0).unwrap();
        assert_eq!(u.at(64, 64), [1.0, 0.0]);
        assert!(u.values.iter().all(|v| v[0] <= 1.0));
    }

    #[test]
    fn non_finite_sample_rejected() {
        let g = Grid2::new([-1.0, -1.0], 0.5, 5, 5).unwrap();
        let err = sample(|p| [1.0 / p[0].hypot(p[1]) * 0.0 / 0.0, 0.0], g, 10.0);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn l2_norm_cases() {
        let g = Grid2::centered(1.0, 64).unwrap();
        let u = sample(|_| [1.0, 0.0], g, 10.0).unwrap();
        assert!((l2_norm(&u, None) - 1.0).abs() < 1e-12);
        assert_eq!(l2_norm(&VectorField2::zeros(g), None), 0.0);
        // int exp(-2|x|^2) = pi/2
        let g = grid(256);
        let u = sample(|p| [(-(p[0] * p[0] + p[1] * p[1])).exp(), 0.0], g, 10.0).unwrap();
        assert!((l2_norm(&u, None) - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn s1_report_cases() {
        let g = grid(64);
        let dom = DomainSpec::disk(g, [0.0, 0.0], 1.0, 0.25, 4.0, 1).unwrap();
        let u = sample(|p| { let r = p[0].hypot(p[1]); [p[0] / r, p[1] / r] }, g, 1.75).unwrap();
        assert!(check_s1_constraint(&u, &dom, 1e-12).max_modulus_error < 1e-15);
        let u = sample(|_| [2.0, 0.0], g, 1.75).unwrap();
        let rep = check_s1_constraint(&u, &dom, 1e-12);
        assert_eq!(rep.max_modulus_error, 1.0);
        assert!(!rep.passes());
        assert_eq!(rep.offending_nodes.len(), dom.omega_mask.iter().filter(|m| **m).count());
    }

    #[test]
    fn raster_round_trip() {
        let g = grid(8);
        let u = sample(|p| [p[0], -p[1]], g, 10.0).unwrap();
        let mut buf = Vec::new();
        write_vector_raster(&mut buf, &u).unwrap();
        assert!(buf.starts_with(b"VF2\n8\n8\n"));
        let r = read_raster(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(r.grid, g);
        assert_eq!(r.channels, 2);
        assert_eq!(r.data[2], u.values[1][0]);
    }

    #[test]
    fn snapping_avoids_nodes() {
        let g = grid(64);
        let p = g.snap_to_cell_center([0.3, -0.41]);
        let fx = (p[0] - g.origin[0]) / g.h;
        assert!((fx - fx.floor() - 0.5).abs() < 1e-9);
        assert_eq!(g.snap_to_cell_center([0.0, 0.0]), [0.0, 0.0]);
    }
}
