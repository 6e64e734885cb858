//! Discrete Jacobians, currents and degrees.
//!
//! Jacobians live on cells: the value of cell `(i, j)` (lower-left node
//! `(i, j)`) is the determinant of the bilinear interpolant's gradient at the
//! cell centre. For a bilinear map that determinant is affine on the cell, so
//! `h^2 J` equals the boundary integral of `u^1 du^2` around the cell exactly;
//! summing cells telescopes to the same integral around any staircase loop.
//! Loops are oriented counterclockwise, so `deg(x/|x|, circle) = +1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{masked_sum, norm, Grid2, VectorField2};

/// Per-cell scalar, `(nx - 1) * (ny - 1)` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianField {
    pub grid: Grid2,
    pub values: Vec<f64>,
}

impl JacobianField {
    pub fn cells_x(&self) -> usize {
        self.grid.nx - 1
    }

    pub fn cells_y(&self) -> usize {
        self.grid.ny - 1
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = (c % self.cells_x(), c / self.cells_x());
        let p = self.grid.node(i, j);
        [p[0] + 0.5 * self.grid.h, p[1] + 0.5 * self.grid.h]
    }

    /// `int J` over the cells whose centres satisfy `keep`.
    pub fn integrate(&self, keep: impl Fn([f64; 2]) -> bool) -> f64 {
        let nx = self.cells_x();
        let mut total = 0.0;
        for j in 0..self.cells_y() {
            let mut row = 0.0;
            for i in 0..nx {
                let c = j * nx + i;
                if keep(self.cell_center(c)) {
                    row += self.values[c];
                }
            }
            total += row;
        }
        total * self.grid.cell_area()
    }

    pub fn total(&self) -> f64 {
        self.integrate(|_| true)
    }

    /// Node-centred scalar raster (each node averages its adjacent cells).
    pub fn to_nodes(&self) -> crate::field::ScalarField {
        let g = self.grid;
        let (cx, cy) = (self.cells_x(), self.cells_y());
        let mut values = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let mut acc = 0.0;
                let mut n = 0.0;
                for (a, b) in [(i.wrapping_sub(1), j.wrapping_sub(1)), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j)] {
                    if a < cx && b < cy {
                        acc += self.values[b * cx + a];
                        n += 1.0;
                    }
                }
                values[g.index(i, j)] = acc / n;
            }
        }
        crate::field::ScalarField { grid: g, values }
    }
}

/// Bilinear cell gradient of a scalar sampled on nodes: `(d_x, d_y)` at the cell centre.
#[inline]
fn cell_grad(f: &[f64], g: &Grid2, i: usize, j: usize) -> [f64; 2] {
    let a = f[g.index(i, j)];
    let b = f[g.index(i + 1, j)];
    let c = f[g.index(i, j + 1)];
    let d = f[g.index(i + 1, j + 1)];
    [0.5 * ((b - a) + (d - c)) / g.h, 0.5 * ((c - a) + (d - b)) / g.h]
}

/// `J(a, b) = det [grad a; grad b]` per cell.
pub fn jacobian_pair(a: &[f64], b: &[f64], grid: Grid2) -> JacobianField {
    let (cx, cy) = (grid.nx - 1, grid.ny - 1);
    let mut values = Vec::with_capacity(cx * cy);
    for j in 0..cy {
        for i in 0..cx {
            let ga = cell_grad(a, &grid, i, j);
            let gb = cell_grad(b, &grid, i, j);
            values.push(ga[0] * gb[1] - ga[1] * gb[0]);
        }
    }
    JacobianField { grid, values }
}

/// `Ju = det grad u` per cell.
pub fn jacobian(u: &VectorField2) -> JacobianField {
    jacobian_pair(&u.component(0), &u.component(1), u.grid)
}

/// Divergence form: `h^-2` times the loop integral of `u^1 du^2` around each cell.
pub fn jacobian_divergence_form(u: &VectorField2) -> JacobianField {
    let g = u.grid;
    let (cx, cy) = (g.nx - 1, g.ny - 1);
    let mut values = Vec::with_capacity(cx * cy);
    for j in 0..cy {
        for i in 0..cx {
            let corners = [u.at(i, j), u.at(i + 1, j), u.at(i + 1, j + 1), u.at(i, j + 1)];
            let mut acc = 0.0;
            for k in 0..4 {
                let (p, q) = (corners[k], corners[(k + 1) % 4]);
                acc += 0.5 * (p[0] + q[0]) * (q[1] - p[1]);
            }
            values.push(acc / g.cell_area());
        }
    }
    JacobianField { grid: g, values }
}

/// `j(u) = u^1 grad u^2 - u^2 grad u^1` at nodes.
pub fn current(u: &VectorField2) -> Vec<[f64; 2]> {
    let g = u.grid;
    (0..g.len())
        .map(|k| {
            let (i, j) = (k % g.nx, k / g.nx);
            let d = crate::field::node_gradient(u, i, j);
            let v = u.values[k];
            [v[0] * d[1][0] - v[1] * d[0][0], v[0] * d[1][1] - v[1] * d[0][1]]
        })
        .collect()
}

/// `curl j / 2` per cell from the nodal current.
pub fn half_curl(j: &[[f64; 2]], grid: Grid2) -> JacobianField {
    let jx: Vec<f64> = j.iter().map(|v| v[0]).collect();
    let jy: Vec<f64> = j.iter().map(|v| v[1]).collect();
    let (cx, cy) = (grid.nx - 1, grid.ny - 1);
    let mut values = Vec::with_capacity(cx * cy);
    for b in 0..cy {
        for a in 0..cx {
            let gx = cell_grad(&jx, &grid, a, b);
            let gy = cell_grad(&jy, &grid, a, b);
            values.push(0.5 * (gy[0] - gx[1]));
        }
    }
    JacobianField { grid, values }
}

pub const C_MIN: f64 = 0.5;
pub const RESIDUAL_MAX: f64 = 0.1;
pub const AREA_TOL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub degree: i64,
    /// Winding number before rounding.
    pub winding: f64,
    pub residual: f64,
    pub min_modulus: f64,
    /// `(1/pi) int J` over the enclosed cells, when computed.
    pub area_degree: Option<f64>,
}

/// Winding number of `u` along a closed polyline (last point joins the first),
/// by the trapezoid rule on `(u^1 du^2 - u^2 du^1) / |u|^2`.
pub fn degree(u: &VectorField2, polyline: &[[f64; 2]]) -> Result<DegreeReport> {
    let vals: Vec<[f64; 2]> = polyline.iter().map(|&p| u.interpolate(p)).collect();
    degree_of_values(&vals, C_MIN)
}

/// Same on already sampled loop values.
pub fn degree_of_values(vals: &[[f64; 2]], c_min: f64) -> Result<DegreeReport> {
    if vals.len() < 3 {
        return Err(Error::InvalidInput("a loop needs at least 3 points".into()));
    }
    let min_modulus = vals.iter().map(|v| norm(*v)).fold(f64::INFINITY, f64::min);
    if !(min_modulus >= c_min) {
        return Err(Error::DegreeUndefined { min_modulus, c_min });
    }
    let n = vals.len();
    let mut total = 0.0;
    for k in 0..n {
        let (p, q) = (vals[k], vals[(k + 1) % n]);
        let d = [q[0] - p[0], q[1] - p[1]];
        let wp = (p[0] * d[1] - p[1] * d[0]) / (p[0] * p[0] + p[1] * p[1]);
        let wq = (q[0] * d[1] - q[1] * d[0]) / (q[0] * q[0] + q[1] * q[1]);
        total += 0.5 * (wp + wq);
    }
    let winding = total / (2.0 * PI);
    let degree = winding.round();
    let residual = (winding - degree).abs();
    if residual >= RESIDUAL_MAX {
        return Err(Error::UnderResolvedLoop { residual });
    }
    Ok(DegreeReport { degree: degree as i64, winding, residual, min_modulus, area_degree: None })
}

/// Point-in-polygon by ray casting.
pub fn inside_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut k = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[k]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        k = i;
    }
    inside
}

/// Degree with the area cross-check `(1/pi) int_A Ju`; needs `|u| = 1` near the loop.
pub fn degree_checked(u: &VectorField2, polyline: &[[f64; 2]]) -> Result<DegreeReport> {
    let mut rep = degree(u, polyline)?;
    let area = jacobian(u).integrate(|c| inside_polygon(c, polyline)) / PI;
    rep.area_degree = Some(area);
    if (area - rep.degree as f64).abs() > AREA_TOL {
        return Err(Error::DegreeMismatch { winding: rep.winding, area });
    }
    Ok(rep)
}

/// `|v - w|_2 (|grad v|_2 + |grad w|_2)`.
pub fn jacobian_flat_distance_bound(v: &VectorField2, w: &VectorField2) -> Result<f64> {
    let diff = VectorField2::combine(1.0, v, -1.0, w)?;
    let l2 = crate::field::l2_norm(&diff, None).sqrt();
    Ok(l2 * (v.dirichlet_integral(None).sqrt() + w.dirichlet_integral(None).sqrt()))
}

/// `sum |a - b| h^2` over cells.
pub fn l1_distance(a: &JacobianField, b: &JacobianField) -> f64 {
    let g = a.grid;
    let cells = Grid2 { nx: g.nx - 1, ny: g.ny - 1, ..g };
    masked_sum(cells, None, |c| (a.values[c] - b.values[c]).abs()) * g.cell_area()
}
