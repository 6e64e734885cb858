//! Fast oracle comparisons on small grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::Check;
use crate::constants::make_params;
use crate::energy::{gagliardo_parts, gagliardo_parts_direct, Region};
use crate::error::Result;
use crate::field::{Grid2, VectorField2};
use crate::flatnorm::{flat_norm, FlatBall, FlatInput, FlatVariant, SolverOptions};
use crate::riesz::{potential, potential_direct, Normalization};
use crate::topology::{degree_checked, jacobian, jacobian_divergence_form, l1_distance};
use crate::vortex::{build_block, DiracSum};
use crate::field::circle_loop;

fn random_field(g: Grid2, seed: u64, support: f64) -> Result<VectorField2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..g.len()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    VectorField2::from_values(g, vals, support)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn seminorm_check() -> Result<Check> {
    let g = Grid2::centered(2.0, 24)?;
    let u = random_field(g, 1, 0.8)?;
    let mask = g.mask(|p| p[0] + 0.5 * p[1] > -0.2);
    let mut worst = 0.0f64;
    for region in [Region::FULL, Region::within(&mask)] {
        for cutoff in [None, Some(0.3)] {
            let a = gagliardo_parts(&u, 0.8, region, cutoff)?;
            let b = gagliardo_parts_direct(&u, 0.8, region, cutoff)?;
            worst = worst.max(rel(a.near, b.near)).max(rel(a.total(), b.total()));
        }
    }
    Ok(Check::new("seminorm fft = direct", worst <= 1e-9, format!("largest relative difference {worst:.2e}")))
}

fn riesz_check() -> Result<Check> {
    let g = Grid2::centered(2.0, 24)?;
    let u = random_field(g, 2, 0.8)?;
    let params = make_params(0.7, 2.0)?;
    let mut worst = 0.0f64;
    for norm in [Normalization::Raw, Normalization::Normalized] {
        let a = potential(&u, &params, norm)?;
        let b = potential_direct(&u, &params, norm)?;
        let scale = b.norm_inf();
        for (x, y) in a.values.iter().zip(&b.values) {
            worst = worst.max((x[0] - y[0]).abs().max((x[1] - y[1]).abs()) / scale);
        }
    }
    Ok(Check::new("riesz fft = direct", worst <= 1e-10, format!("largest relative difference {worst:.2e}")))
}

fn jacobian_check() -> Result<Check> {
    let g = Grid2::centered(2.0, 24)?;
    let u = random_field(g, 3, 10.0)?;
    let (a, b) = (jacobian(&u), jacobian_divergence_form(&u));
    let d = l1_distance(&a, &b);
    let scale = l1_distance(&a, &crate::topology::JacobianField { grid: g, values: vec![0.0; a.values.len()] });
    Ok(Check::new("jacobian = divergence form", d <= 1e-12 * scale, format!("l1 difference {d:.2e}")))
}

fn degree_check() -> Result<Check> {
    let g = Grid2::centered(2.0, 24)?;
    let c = g.snap_to_cell_center([0.1, -0.05]);
    let mut seen = Vec::new();
    let mut ok = true;
    for d in [-2, -1, 1, 2, 3] {
        let u = build_block(c, d, g)?;
        match degree_checked(&u, &circle_loop(c, 0.6, 0.25 * g.h)) {
            Ok(r) => {
                ok &= r.degree == d;
                seen.push(r.degree);
            }
            Err(_) => ok = false,
        }
    }
    Ok(Check::new("block degrees", ok, format!("{seen:?} for [-2, -1, 1, 2, 3]")))
}

fn flat_checks() -> Result<Vec<Check>> {
    let g = Grid2::centered(2.0, 16)?;
    let region = g.mask(|p| p[0].abs() < 0.8 && p[1].abs() < 0.8);
    let atom = DiracSum::single(g.snap_to_cell_center([0.1, 0.0]), 1)?;
    let one = flat_norm(&FlatInput::atoms_only(g, atom, region.clone(), FlatVariant::Closed), SolverOptions::default())?;
    let mut out = vec![Check::new(
        "flat norm of a unit atom",
        (one.value - 1.0).abs() <= 1e-3 && one.primal_dual_gap <= 1e-6,
        format!("{} (gap {:.1e})", one.value, one.primal_dual_gap),
    )];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cells = (g.nx - 1) * (g.ny - 1);
    let density: Vec<f64> = (0..cells)
        .map(|c| {
            let p = [g.origin[0] + ((c % (g.nx - 1)) as f64 + 0.5) * g.h, g.origin[1] + ((c / (g.nx - 1)) as f64 + 0.5) * g.h];
            if p[0].abs() < 0.7 && p[1].abs() < 0.7 {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut worst = 0.0f64;
    for variant in [FlatVariant::Closed, FlatVariant::Open] {
        for ball in [FlatBall::Paper, FlatBall::Simple] {
            let input = FlatInput { grid: g, density: density.clone(), atoms: DiracSum::default(), atom_weight: 1.0, region: region.clone(), variant, ball };
            let a = flat_norm(&input, SolverOptions::default())?;
            let b = flat_norm(&input, SolverOptions::primal_dual(1e-7, 2_000_000))?;
            worst = worst.max((a.value - b.value).abs());
        }
    }
    out.push(Check::new("flat norm flow = primal-dual", worst <= 2e-6, format!("largest difference {worst:.2e}")));
    Ok(out)
}

/// All oracle comparisons; errors become failing checks.
pub fn run_selftest() -> Vec<Check> {
    let mut out = Vec::new();
    let single: [(&str, fn() -> Result<Check>); 4] =
        [("seminorm", seminorm_check), ("riesz", riesz_check), ("jacobian", jacobian_check), ("degree", degree_check)];
    for (name, f) in single {
        out.push(f().unwrap_or_else(|e| Check::new(name, false, e.to_string())));
    }
    match flat_checks() {
        Ok(c) => out.extend(c),
        Err(e) => out.push(Check::new("flat norm", false, e.to_string())),
    }
    out
}
