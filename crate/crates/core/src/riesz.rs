//! Truncated Riesz potentials and the fractional gradient.
//!
//! Both potentials convolve with `|z|^-(1+s)` restricted to `|z| <= R`.
//! The raw one carries the factor `1/gamma_s`, the normalised one
//! `(1-s) / (2 pi R^(1-s))`, so they differ exactly by `quoz_factor`.
//! Applying the truncated kernel to fields whose support is not contained in
//! `B_R(x)` is allowed but is an extension: the result is then a local average,
//! not the global potential.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::FracParams;
use crate::error::{Error, Result};
use crate::fft::Convolver;
use crate::field::{node_gradient, Grid2, ScalarField, VectorField2};
use crate::quadrature::{cell_integral, cell_power_integral, origin_cell_integral, OffsetTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `I_{1-s}`, prefactor `1/gamma_s`.
    Raw,
    /// `I~_{1-s}`, unit-mass kernel on `B_R`.
    Normalized,
}

#[derive(Debug, Clone)]
pub struct RieszKernel {
    pub params: FracParams,
    pub grid: Grid2,
    /// `kappa * int_cell |z|^-(1+s) dz` for offsets with `|z| <= R`, zero beyond.
    pub cell_weights: OffsetTable,
    pub normalization: Normalization,
    /// Rescaling that makes the discrete kernel mass on `B_R` exact (close to 1).
    pub kappa: f64,
}

impl RieszKernel {
    pub fn new(params: FracParams, grid: Grid2, normalization: Normalization) -> Result<Self> {
        let (cell_weights, kappa) = kernel_table(&params, grid.h);
        Ok(Self { params, grid, cell_weights, normalization, kappa })
    }

    pub fn prefactor(&self) -> f64 {
        match self.normalization {
            Normalization::Raw => 1.0 / self.params.gamma_s,
            Normalization::Normalized => self.params.normalized_prefactor(),
        }
    }

    /// Full weight `prefactor * cell_weight` of one offset.
    pub fn weight(&self, dx: i64, dy: i64) -> f64 {
        let k = self.cell_weights.k as i64;
        if dx.abs() > k || dy.abs() > k {
            return 0.0;
        }
        self.prefactor() * self.cell_weights.get(dx, dy)
    }

    pub fn apply(&self, u: &VectorField2) -> Result<VectorField2> {
        check_field(&self.params, u)?;
        if u.grid != self.grid {
            return Err(Error::InvalidInput("kernel and field grids differ".into()));
        }
        let mut table = self.cell_weights.clone();
        let pre = self.prefactor();
        table.data.iter_mut().for_each(|w| *w *= pre);
        let conv = Convolver::new(&table, u.grid.nx, u.grid.ny)?;
        let a = conv.apply(&u.component(0));
        let b = conv.apply(&u.component(1));
        Ok(VectorField2 {
            grid: u.grid,
            values: a.into_iter().zip(b).map(|(x, y)| [x, y]).collect(),
            support_radius: u.support_radius + self.params.r_kernel,
        })
    }
}

fn kernel_table(params: &FracParams, h: f64) -> (OffsetTable, f64) {
    let p = 1.0 + params.s;
    let r = params.r_kernel;
    let k = (r / h).floor() as usize;
    let mut t = OffsetTable::from_octant(k, |ix, iy| {
        if ((ix * ix + iy * iy) as f64).sqrt() * h > r {
            0.0
        } else if ix == 0 && iy == 0 {
            origin_cell_integral(p, h)
        } else {
            cell_power_integral(p, ix, iy, h)
        }
    });
    let exact = 2.0 * std::f64::consts::PI * r.powf(1.0 - params.s) / (1.0 - params.s);
    let kappa = exact / t.sum();
    t.data.iter_mut().for_each(|w| *w *= kappa);
    (t, kappa)
}

fn check_field(params: &FracParams, u: &VectorField2) -> Result<()> {
    let diameter = 2.0 * u.support_radius;
    if params.r_kernel <= diameter {
        return Err(Error::KernelRadiusTooSmall { radius: params.r_kernel, diameter });
    }
    Ok(())
}

/// `I_{1-s} u` or `I~_{1-s} u` by zero-padded FFT convolution.
pub fn potential(u: &VectorField2, params: &FracParams, normalization: Normalization) -> Result<VectorField2> {
    RieszKernel::new(*params, u.grid, normalization)?.apply(u)
}

/// Direct-summation potential; quadratic in the node count, for testing.
pub fn potential_direct(u: &VectorField2, params: &FracParams, normalization: Normalization) -> Result<VectorField2> {
    check_field(params, u)?;
    let ker = RieszKernel::new(*params, u.grid, normalization)?;
    let g = u.grid;
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = ((k % g.nx) as i64, (k / g.nx) as i64);
            let mut acc = [0.0; 2];
            for q in 0..g.ny as i64 {
                for p in 0..g.nx as i64 {
                    let w = ker.weight(i - p, j - q);
                    let v = u.values[(q as usize) * g.nx + p as usize];
                    acc[0] += w * v[0];
                    acc[1] += w * v[1];
                }
            }
            acc
        })
        .collect();
    Ok(VectorField2 { grid: g, values, support_radius: u.support_radius + params.r_kernel })
}

/// Matrix field, `values[k][a][b] = d_b (component a)` at node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FracGradField {
    pub grid: Grid2,
    pub values: Vec<[[f64; 2]; 2]>,
}

impl FracGradField {
    pub fn det(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|m| m[0][0] * m[1][1] - m[0][1] * m[1][0]).collect(),
        }
    }

    /// `int |M|^2` (Frobenius) by midpoint quadrature.
    pub fn l2_sq(&self) -> f64 {
        crate::field::masked_sum(self.grid, None, |k| frob_sq(&self.values[k], None)) * self.grid.cell_area()
    }

    /// `int |M - N|^2`.
    pub fn l2_dist_sq(&self, other: &Self) -> f64 {
        crate::field::masked_sum(self.grid, None, |k| frob_sq(&self.values[k], Some(&other.values[k])))
            * self.grid.cell_area()
    }
}

fn frob_sq(m: &[[f64; 2]; 2], n: Option<&[[f64; 2]; 2]>) -> f64 {
    let z = [[0.0; 2]; 2];
    let n = n.unwrap_or(&z);
    let mut s = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            s += (m[a][b] - n[a][b]).powi(2);
        }
    }
    s
}

/// `grad_s u = grad I_{1-s} u`: centred differences of the raw FFT potential.
pub fn frac_gradient(u: &VectorField2, params: &FracParams) -> Result<FracGradField> {
    let pot = potential(u, params, Normalization::Raw)?;
    Ok(gradient_of(&pot))
}

pub(crate) fn gradient_of(v: &VectorField2) -> FracGradField {
    let g = v.grid;
    FracGradField { grid: g, values: (0..g.len()).map(|k| node_gradient(v, k % g.nx, k / g.nx)).collect() }
}

/// Singular-quadrature evaluation of
/// `(1+s)/gamma_s int (u(y) - u(x)) (x) (y - x) / |y - x|^(3+s) dy`.
///
/// Off-origin cells use product integration against the linear expansion of
/// `u` about the source node; the origin cell uses the first-order expansion
/// of `u`, which contributes `grad u(x) / 2 * int_cell |z|^-(1+s)`. Slow; a
/// reference for `frac_gradient`.
pub fn frac_gradient_direct(u: &VectorField2, params: &FracParams) -> Result<FracGradField> {
    check_field(params, u)?;
    let g = u.grid;
    let h = g.h;
    let s = params.s;
    let r = params.r_kernel;
    let k = ((r / h).floor() as usize).min(g.nx.max(g.ny) - 1) as i64;
    let side = (2 * k + 1) as usize;
    // per cell: int z_1 K, int (z_1 - c_1) z_1 K, int (z_2 - c_2) z_1 K with
    // K = |z|^-(3+s) and c the cell centre; the y-components are transposes
    let rows: Vec<Vec<[f64; 3]>> = (-k..=k)
        .into_par_iter()
        .map(|dy| {
            (-k..=k)
                .map(|dx| {
                    if (dx == 0 && dy == 0) || ((dx * dx + dy * dy) as f64).sqrt() * h > r {
                        return [0.0; 3];
                    }
                    let (cx, cy) = (dx as f64 * h, dy as f64 * h);
                    let ker = |x: f64, y: f64| x * (x * x + y * y).powf(-0.5 * (3.0 + s));
                    [
                        cell_integral(ker, dx, dy, h),
                        cell_integral(|x, y| (x - cx) * ker(x, y), dx, dy, h),
                        cell_integral(|x, y| (y - cy) * ker(x, y), dx, dy, h),
                    ]
                })
                .collect()
        })
        .collect();
    let bx: Vec<[f64; 3]> = rows.into_iter().flatten().collect();
    let at = |dx: i64, dy: i64| ((dy + k) as usize) * side + (dx + k) as usize;
    let c = params.frac_grad_const();
    let d0 = origin_cell_integral(1.0 + s, h);
    let sources: Vec<(i64, i64, [f64; 2], [[f64; 2]; 2])> = (0..g.len())
        .map(|q| (q % g.nx, q / g.nx))
        .map(|(p, l)| (p as i64, l as i64, u.at(p, l), node_gradient(u, p, l)))
        .filter(|(_, _, v, gr)| *v != [0.0, 0.0] || gr.iter().flatten().any(|x| *x != 0.0))
        .collect();
    let values = (0..g.len())
        .into_par_iter()
        .map(|q| {
            let (i, j) = ((q % g.nx) as i64, (q / g.nx) as i64);
            let mut m = [[0.0; 2]; 2];
            for &(p, l, v, du) in &sources {
                let (dx, dy) = (p - i, l - j);
                if dx.abs() > k || dy.abs() > k || (dx == 0 && dy == 0) {
                    continue;
                }
                let [wx, mxx, myx] = bx[at(dx, dy)];
                let [wy, myy, mxy] = bx[at(dy, dx)];
                for a in 0..2 {
                    m[a][0] += v[a] * wx + du[a][0] * mxx + du[a][1] * myx;
                    m[a][1] += v[a] * wy + du[a][0] * mxy + du[a][1] * myy;
                }
            }
            let gr = node_gradient(u, i as usize, j as usize);
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] = c * (m[a][b] + 0.5 * gr[a][b] * d0);
                }
            }
            m
        })
        .collect();
    Ok(FracGradField { grid: g, values })
}

/// `J(I u) = det grad I_{1-s} u` per node, for either normalisation.
pub fn jacobian_of_potential(u: &VectorField2, params: &FracParams, normalization: Normalization) -> Result<ScalarField> {
    let pot = potential(u, params, normalization)?;
    Ok(gradient_of(&pot).det())
}
