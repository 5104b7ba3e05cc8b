//! Test-side oracles and instance builders. The oracles deliberately share
//! no code with the library: own elimination, own vertex scan, own call
//! price checks.
#![allow(dead_code)]

use itertools::Itertools;
use martingale_ot::lab::{random_convex_pair, random_coupling, random_measure, rng};
use martingale_ot::measures::{DiscreteCoupling, DiscreteMeasure};
use rand::Rng;

/// Solves the square system `m x = rhs` by Gaussian elimination with
/// partial pivoting. `None` when a pivot falls below `1e-10`.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        rhs.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

/// Independent rows of `[a | b]` (a consistent system is assumed).
fn independent_rows(a: &[Vec<f64>], b: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = a.first().map_or(0, Vec::len);
    let mut rows: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    let mut keep = Vec::new();
    let mut reduced: Vec<Vec<f64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    for (idx, row) in rows.iter_mut().enumerate() {
        for (r, &pc) in reduced.iter().zip(&pivots) {
            let f = row[pc] / r[pc];
            if f != 0.0 {
                for k in 0..=n {
                    row[k] -= f * r[k];
                }
            }
        }
        if let Some(pc) = (0..n).max_by(|&x, &y| row[x].abs().total_cmp(&row[y].abs())) {
            if row[pc].abs() > 1e-9 {
                reduced.push(row.clone());
                pivots.push(pc);
                keep.push(idx);
            }
        }
    }
    (
        keep.iter().map(|&i| a[i].clone()).collect(),
        keep.iter().map(|&i| b[i]).collect(),
    )
}

/// All basic feasible solutions of `{x >= 0 : a x = b}` by scanning every
/// column basis.
pub fn vertex_scan(a: &[Vec<f64>], b: &[f64]) -> Vec<Vec<f64>> {
    let n = a.first().map_or(0, Vec::len);
    let (a, b) = independent_rows(a, b);
    let r = b.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for cols in (0..n).combinations(r) {
        let m: Vec<Vec<f64>> = a.iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect();
        let Some(xb) = solve_square(m, b.clone()) else { continue };
        if xb.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (&c, &v) in cols.iter().zip(&xb) {
            x[c] = v.max(0.0);
        }
        let residual = a
            .iter()
            .zip(&b)
            .map(|(row, &bi)| (row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max);
        if residual > 1e-8 {
            continue;
        }
        if !out.iter().any(|y| y.iter().zip(&x).all(|(p, q)| (p - q).abs() < 1e-9)) {
            out.push(x);
        }
    }
    out
}

/// `min c.x` over `{x >= 0 : a x = b}` by vertex scan.
pub fn vertex_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    vertex_scan(a, b)
        .iter()
        .map(|x| c.iter().zip(x).map(|(p, q)| p * q).sum::<f64>())
        .min_by(f64::total_cmp)
}

/// Full transport constraints (every row and every column) on an `m x n`
/// grid, row-major.
pub fn transport_rows(a: &[f64], b: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (m, n) = (a.len(), b.len());
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..m {
        let mut r = vec![0.0; m * n];
        (0..n).for_each(|j| r[i * n + j] = 1.0);
        rows.push(r);
        rhs.push(a[i]);
    }
    for j in 0..n {
        let mut r = vec![0.0; m * n];
        (0..m).for_each(|i| r[i * n + j] = 1.0);
        rows.push(r);
        rhs.push(b[j]);
    }
    (rows, rhs)
}

/// Transport rows plus one barycentre row per first-coordinate atom.
pub fn martingale_rows(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (mut rows, mut rhs) = transport_rows(mu.weights(), nu.weights());
    let n = nu.len();
    for (i, &x) in mu.atoms().iter().enumerate() {
        let mut r = vec![0.0; mu.len() * n];
        for (j, &y) in nu.atoms().iter().enumerate() {
            r[i * n + j] = y - x;
        }
        rows.push(r);
        rhs.push(0.0);
    }
    (rows, rhs)
}

/// Coupling on `mu x nu` from a row-major mass vector, dropping cells below
/// `1e-13`.
pub fn grid_to_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure, x: &[f64]) -> DiscreteCoupling {
    let n = nu.len();
    let pts = x
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 1e-13)
        .map(|(k, &w)| (mu.atoms()[k / n], nu.atoms()[k % n], w));
    DiscreteCoupling::new(pts).expect("grid coupling")
}

/// `mu <= nu` in convex order, checked through call prices at every atom.
pub fn convex_order_by_calls(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    let mean = |m: &DiscreteMeasure| m.iter().map(|(x, w)| x * w).sum::<f64>();
    let call = |m: &DiscreteMeasure, k: f64| m.iter().map(|(x, w)| w * (x - k).max(0.0)).sum::<f64>();
    if (mean(mu) - mean(nu)).abs() > 1e-10 {
        return false;
    }
    mu.atoms().iter().chain(nu.atoms()).all(|&k| call(mu, k) <= call(nu, k) + 1e-10)
}

/// `W_p^p` between two measures on the line by integrating the quantile
/// gap over the merged breakpoints of both distribution functions.
pub fn quantile_wpp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> f64 {
    let cdf = |m: &DiscreteMeasure| {
        m.weights()
            .iter()
            .scan(0.0, |s, w| {
                *s += w;
                Some(*s)
            })
            .collect::<Vec<f64>>()
    };
    let (fa, fb) = (cdf(mu), cdf(nu));
    let mut cuts: Vec<f64> = fa.iter().chain(&fb).copied().chain([0.0]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let q = |m: &DiscreteMeasure, f: &[f64], t: f64| {
        let i = f.partition_point(|&c| c < t).min(m.len() - 1);
        m.atoms()[i]
    };
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0]) * (q(mu, &fa, mid) - q(nu, &fb, mid)).abs().powf(p)
        })
        .sum()
}

/// Sizes of a random instance: `|supp mu| <= 6`, `|supp nu| <= 8`.
pub fn sizes(seed: u64) -> (usize, usize) {
    let mut r = rng(seed ^ 0x5eed);
    let m = r.gen_range(1..=6);
    (m, r.gen_range(m.max(2)..=8))
}

pub fn convex_pair(seed: u64) -> (DiscreteMeasure, DiscreteMeasure) {
    let (m, k) = sizes(seed);
    random_convex_pair(seed, m, k, 5.0).expect("convex pair")
}

/// A random coupling of a random convex pair.
pub fn coupling(seed: u64) -> DiscreteCoupling {
    let (mu, nu) = convex_pair(seed);
    random_coupling(seed.wrapping_mul(31).wrapping_add(7), &mu, &nu).expect("random coupling")
}

/// Pairs of four kinds: ordered, reversed, equal-mean unrelated, and
/// unrelated with different means.
pub fn mixed_pair(seed: u64) -> (DiscreteMeasure, DiscreteMeasure) {
    let (mu, nu) = convex_pair(seed);
    match seed % 4 {
        0 => (mu, nu),
        1 => (nu, mu),
        kind => {
            let mut r = rng(seed);
            let ka = r.gen_range(1..=5);
            let a = random_measure(&mut r, ka, 4.0).unwrap();
            let kb = r.gen_range(1..=6);
            let b = random_measure(&mut r, kb, 4.0).unwrap();
            if kind == 2 {
                let shift = b.mean() - a.mean();
                let atoms: Vec<f64> = a.atoms().iter().map(|x| x + shift).collect();
                (DiscreteMeasure::new(&atoms, a.weights()).unwrap(), b)
            } else {
                (a, b)
            }
        }
    }
}

/// Uniform first marginal on `m` grid atoms, second marginal from two-point
/// martingale kernels, and a random (generally non-martingale) coupling of
/// the two.
pub fn uniform_mu_coupling(seed: u64, m: usize) -> DiscreteCoupling {
    let mut r = rng(seed);
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < m {
        let x = r.gen_range(-8i32..=8) as f64 * 0.5;
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    let mut pts = Vec::new();
    for &x in &xs {
        let down = r.gen_range(1i32..=8) as f64 * 0.25;
        let up = r.gen_range(1i32..=8) as f64 * 0.25;
        let w = 1.0 / m as f64;
        pts.push((x, x - down, w * up / (up + down)));
        pts.push((x, x + up, w * down / (up + down)));
    }
    let mart = DiscreteCoupling::new(pts).unwrap();
    random_coupling(seed ^ 0xabcd, mart.first_marginal(), mart.second_marginal()).unwrap()
}
