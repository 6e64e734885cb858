//! Zero-padded 2D FFT convolution and correlation on node arrays.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::quadrature::OffsetTable;

/// Largest padded side accepted.
pub const MAX_PADDED: usize = 1 << 13;

type Plan = Arc<dyn Fft<f64>>;

fn plan(len: usize, inverse: bool) -> Plan {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    plans
        .entry((len, inverse))
        .or_insert_with(|| if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) })
        .clone()
}

/// Padded side for a linear convolution of `n` samples with offsets `[-k, k]`.
pub fn padded_len(n: usize, k: usize) -> Result<usize> {
    let required = (n + k).next_power_of_two();
    if required > MAX_PADDED {
        return Err(Error::PaddingTooSmall { required, limit: MAX_PADDED });
    }
    Ok(required)
}

/// In-place 2D transform of a `px * py` row-major buffer.
fn fft2(buf: &mut [Complex64], px: usize, py: usize, inverse: bool) {
    let row = plan(px, inverse);
    let mut scratch = vec![Complex64::default(); row.get_inplace_scratch_len()];
    for r in buf.chunks_exact_mut(px) {
        row.process_with_scratch(r, &mut scratch);
    }
    let col = plan(py, inverse);
    let mut scratch = vec![Complex64::default(); col.get_inplace_scratch_len()];
    let mut column = vec![Complex64::default(); py];
    for i in 0..px {
        for j in 0..py {
            column[j] = buf[j * px + i];
        }
        col.process_with_scratch(&mut column, &mut scratch);
        for j in 0..py {
            buf[j * px + i] = column[j];
        }
    }
    if inverse {
        let scale = 1.0 / (px * py) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

fn embed(data: &[f64], nx: usize, ny: usize, px: usize, py: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::default(); px * py];
    for j in 0..ny {
        for i in 0..nx {
            buf[j * px + i] = Complex64::new(data[j * nx + i], 0.0);
        }
    }
    buf
}

/// Convolution with a fixed symmetric offset kernel, reusable across channels.
pub struct Convolver {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    kernel_hat: Vec<Complex64>,
}

impl Convolver {
    pub fn new(kernel: &OffsetTable, nx: usize, ny: usize) -> Result<Self> {
        let px = padded_len(nx, kernel.k)?;
        let py = padded_len(ny, kernel.k)?;
        let k = kernel.k as i64;
        let mut buf = vec![Complex64::default(); px * py];
        for dy in -k..=k {
            for dx in -k..=k {
                let i = dx.rem_euclid(px as i64) as usize;
                let j = dy.rem_euclid(py as i64) as usize;
                buf[j * px + i] += kernel.get(dx, dy);
            }
        }
        fft2(&mut buf, px, py, false);
        Ok(Self { nx, ny, px, py, kernel_hat: buf })
    }

    /// `out(x) = sum_z K(z) f(x - z)` for every node `x` of the grid.
    pub fn apply(&self, data: &[f64]) -> Vec<f64> {
        let mut buf = embed(data, self.nx, self.ny, self.px, self.py);
        fft2(&mut buf, self.px, self.py, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        fft2(&mut buf, self.px, self.py, true);
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(buf[j * self.px + i].re);
            }
        }
        out
    }
}

/// Correlations `C(z) = sum_x a(x) b(x + z)` for `|z_1|, |z_2| <= k`, summed over
/// channel pairs `(a_c, b_c)`. Indexing as an `OffsetTable`.
pub fn correlate(pairs: &[(&[f64], &[f64])], nx: usize, ny: usize, k: usize) -> Result<OffsetTable> {
    let px = padded_len(nx, k)?;
    let py = padded_len(ny, k)?;
    let mut acc = vec![Complex64::default(); px * py];
    for (a, b) in pairs {
        let mut fa = embed(a, nx, ny, px, py);
        let mut fb = embed(b, nx, ny, px, py);
        fft2(&mut fa, px, py, false);
        fft2(&mut fb, px, py, false);
        for ((c, x), y) in acc.iter_mut().zip(&fa).zip(&fb) {
            *c += x.conj() * y;
        }
    }
    fft2(&mut acc, px, py, true);
    let side = 2 * k + 1;
    let ki = k as i64;
    let mut data = Vec::with_capacity(side * side);
    for dy in -ki..=ki {
        for dx in -ki..=ki {
            let i = dx.rem_euclid(px as i64) as usize;
            let j = dy.rem_euclid(py as i64) as usize;
            data.push(acc[j * px + i].re);
        }
    }
    Ok(OffsetTable { k, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let (nx, ny, k) = (13, 9, 5);
        let f = random(nx * ny, 1);
        let kern = OffsetTable::from_octant(k, |a, b| 1.0 / (1.0 + (a * a + b * b) as f64));
        let out = Convolver::new(&kern, nx, ny).unwrap().apply(&f);
        for j in 0..ny as i64 {
            for i in 0..nx as i64 {
                let mut s = 0.0;
                for dy in -(k as i64)..=k as i64 {
                    for dx in -(k as i64)..=k as i64 {
                        let (a, b) = (i - dx, j - dy);
                        if a >= 0 && b >= 0 && a < nx as i64 && b < ny as i64 {
                            s += kern.get(dx, dy) * f[(b * nx as i64 + a) as usize];
                        }
                    }
                }
                assert!((s - out[(j * nx as i64 + i) as usize]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correlation_matches_direct_sum() {
        let (nx, ny, k) = (7, 6, 6);
        let a = random(nx * ny, 2);
        let b = random(nx * ny, 3);
        let c = correlate(&[(&a, &b)], nx, ny, k).unwrap();
        for dy in -(k as i64)..=k as i64 {
            for dx in -(k as i64)..=k as i64 {
                let mut s = 0.0;
                for j in 0..ny as i64 {
                    for i in 0..nx as i64 {
                        let (p, q) = (i + dx, j + dy);
                        if p >= 0 && q >= 0 && p < nx as i64 && q < ny as i64 {
                            s += a[(j * nx as i64 + i) as usize] * b[(q * nx as i64 + p) as usize];
                        }
                    }
                }
                assert!((s - c.get(dx, dy)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oversized_padding_is_rejected() {
        assert!(matches!(padded_len(MAX_PADDED, 1), Err(Error::PaddingTooSmall { .. })));
        assert_eq!(padded_len(256, 256).unwrap(), 512);
    }
}
