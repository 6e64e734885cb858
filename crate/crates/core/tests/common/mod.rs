//! Dense simplex for the flat norm on small grids.

#![allow(dead_code)]

use fraclab::{FlatBall, FlatInput, FlatVariant};

const EPS: f64 = 1e-11;
const PIVOT: f64 = 1e-9;

/// `min c.x` subject to `A x = b`, `x >= 0`, by the two-phase tableau
/// method. Dantzig pricing, Bland's rule after a run of degenerate pivots.
pub fn simplex_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let (m, n) = (a.len(), c.len());
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0usize; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = sign * b[i];
        basis[i] = n + i;
    }
    // phase one: minimise the sum of artificials
    for i in 0..m {
        for j in 0..width {
            t[m][j] -= t[i][j];
        }
    }
    for j in n..n + m {
        t[m][j] = 0.0;
    }
    run(&mut t, &mut basis, n + m);
    if t[m][width - 1].abs() > 1e-9 {
        return None;
    }
    // drive remaining artificials out of the basis
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    for row in t.iter_mut() {
        for v in &mut row[n..n + m] {
            *v = 0.0;
        }
    }
    t[m] = vec![0.0; width];
    t[m][..n].copy_from_slice(c);
    for i in 0..m {
        let cb = if basis[i] < n { c[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                t[m][j] -= cb * t[i][j];
            }
        }
    }
    run(&mut t, &mut basis, n);
    Some(-t[m][width - 1])
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, col: usize) {
    let p = t[r][col];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[col];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(&prow) {
                    *x -= f * y;
                }
            }
        }
    }
    basis[r] = col;
}

fn run(t: &mut [Vec<f64>], basis: &mut [usize], cols: usize) {
    let m = basis.len();
    let (mut degenerate, mut bland) = (0, false);
    loop {
        bland |= degenerate > 50;
        let mut candidates: Vec<usize> = (0..cols).filter(|&j| t[m][j] < -EPS).collect();
        if !bland {
            candidates.sort_by(|&x, &y| t[m][x].total_cmp(&t[m][y]));
        }
        // columns without an admissible pivot carry only rounding noise
        let Some((col, r, ratio)) = candidates.into_iter().find_map(|col| leaving(t, basis, col).map(|(r, q)| (col, r, q))) else {
            return;
        };
        degenerate = if ratio.abs() <= EPS { degenerate + 1 } else { 0 };
        pivot(t, basis, r, col);
    }
}

/// Ratio test with ties to the smallest basic index.
fn leaving(t: &[Vec<f64>], basis: &[usize], col: usize) -> Option<(usize, f64)> {
    let last = t[0].len() - 1;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..basis.len() {
        if t[i][col] > PIVOT {
            let ratio = t[i][last] / t[i][col];
            let better = match best {
                None => true,
                Some((bi, br)) => ratio < br - EPS || (ratio <= br + EPS && basis[i] < basis[bi]),
            };
            if better {
                best = Some((i, ratio));
            }
        }
    }
    best
}

/// Flat norm of `input` from the joint LP in `(phi, a, l)`:
/// `max <m, phi>` with `|phi| <= a`, `|D phi| <= l` on 8-neighbour edges and
/// `a + l <= 1` (paper ball) or `a, l <= 1` (simple ball), solved through
/// its dual. Test functions vanish on boundary nodes for the open variant.
pub fn flat_norm_lp(input: &FlatInput) -> f64 {
    let g = input.grid;
    let m = input.node_masses().unwrap();
    let inside = |i: i64, j: i64| i >= 0 && j >= 0 && i < g.nx as i64 && j < g.ny as i64 && input.region[g.index(i as usize, j as usize)];
    let mut free = vec![usize::MAX; g.len()];
    let mut nodes = Vec::new();
    for k in 0..g.len() {
        if !input.region[k] {
            continue;
        }
        let (i, j) = ((k % g.nx) as i64, (k / g.nx) as i64);
        let pinned = input.variant == FlatVariant::Open
            && (-1..=1).any(|dy| (-1..=1).any(|dx| !inside(i + dx, j + dy)));
        if !pinned {
            free[k] = nodes.len();
            nodes.push(k);
        }
    }
    // edges between region nodes touching at least one free node
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for k in 0..g.len() {
        if !input.region[k] {
            continue;
        }
        let (i, j) = ((k % g.nx) as i64, (k / g.nx) as i64);
        for (dx, dy) in [(1i64, 0i64), (0, 1), (1, 1), (-1, 1)] {
            if inside(i + dx, j + dy) {
                let q = g.index((i + dx) as usize, (j + dy) as usize);
                if free[k] != usize::MAX || free[q] != usize::MAX {
                    let len = if dx != 0 && dy != 0 { g.h * std::f64::consts::SQRT_2 } else { g.h };
                    edges.push((k, q, len));
                }
            }
        }
    }
    let (nn, ne) = (nodes.len(), edges.len());
    // columns: p+ p- (nn each), w+ w- (ne each), sigma_a, sigma_l, t_a, t_l
    let cols = 2 * nn + 2 * ne + 4;
    let (sa, sl, ta, tl) = (cols - 4, cols - 3, cols - 2, cols - 1);
    let rows = nn + 2;
    let mut a = vec![vec![0.0; cols]; rows];
    let mut b = vec![0.0; rows];
    for (r, &k) in nodes.iter().enumerate() {
        a[r][r] = 1.0;
        a[r][nn + r] = -1.0;
        b[r] = m[k];
    }
    for (e, &(p, q, len)) in edges.iter().enumerate() {
        for (node, sign) in [(p, 1.0), (q, -1.0)] {
            if free[node] != usize::MAX {
                a[free[node]][2 * nn + e] += sign / len;
                a[free[node]][2 * nn + ne + e] -= sign / len;
            }
        }
    }
    for j in 0..2 * nn {
        a[nn][j] = 1.0;
    }
    for j in 2 * nn..2 * nn + 2 * ne {
        a[nn + 1][j] = 1.0;
    }
    a[nn][sa] = 1.0;
    a[nn + 1][sl] = 1.0;
    let mut c = vec![0.0; cols];
    match input.ball {
        FlatBall::Paper => {
            // one multiplier t for a + l <= 1: tie t_a = t_l through both rows
            a[nn][ta] = -1.0;
            a[nn + 1][ta] = -1.0;
            c[ta] = 1.0;
        }
        FlatBall::Simple => {
            a[nn][ta] = -1.0;
            a[nn + 1][tl] = -1.0;
            c[ta] = 1.0;
            c[tl] = 1.0;
        }
    }
    simplex_min(&a, &b, &c).expect("flat norm LP is feasible")
}
