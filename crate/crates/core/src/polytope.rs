//! Exhaustive vertex enumeration for `{x >= 0 : A x = b}`.
//!
//! Only meant for desk-scale polytopes: every choice of `rank(A)` columns is
//! tried as a basis.

use std::collections::BTreeSet;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::lp::gauss_solve;

const RANK_TOL: f64 = 1e-10;
const NONNEG_TOL: f64 = 1e-10;
/// Vertices agreeing after rounding to this grid are the same vertex.
pub const DEDUP_GRID: f64 = 1e-9;

/// Upper bound on the number of column subsets tried before giving up.
pub const DEFAULT_BASIS_BUDGET: u64 = 5_000_000;

/// Returns the basic feasible solutions of `{x >= 0 : A x = b}`, deduplicated
/// and in a deterministic order.
pub fn vertices(a: &[Vec<f64>], b: &[f64], budget: u64) -> Result<Vec<Vec<f64>>> {
    let n = a.first().map_or(0, Vec::len);
    let Some((rows, rhs)) = independent_rows(a, b) else {
        return Ok(Vec::new());
    };
    let r = rows.len();
    if r == 0 {
        return Ok(vec![vec![0.0; n]]);
    }
    let count = binomial(n as u64, r as u64);
    if count > budget {
        return Err(Error::SizeGuard(format!("{count} candidate bases exceed the budget of {budget}")));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for cols in (0..n).combinations(r) {
        let mut mat: Vec<Vec<f64>> = (0..r)
            .map(|i| {
                let mut row: Vec<f64> = cols.iter().map(|&c| rows[i][c]).collect();
                row.push(rhs[i]);
                row
            })
            .collect();
        let Some(sol) = gauss_solve(&mut mat, r) else {
            continue;
        };
        if sol.iter().any(|&v| v < -NONNEG_TOL) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (&c, v) in cols.iter().zip(sol) {
            x[c] = v.max(0.0);
        }
        let key: Vec<i64> = x.iter().map(|v| (v / DEDUP_GRID).round() as i64).collect();
        if seen.insert(key) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Row-reduces `[A | b]` and keeps a maximal independent set of rows.
/// `None` when the system is inconsistent.
fn independent_rows(a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = a.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &v)| {
            let mut r = row.clone();
            r.push(v);
            r
        })
        .collect();
    let mut rank = 0;
    for col in 0..n {
        if rank == m.len() {
            break;
        }
        let piv = (rank..m.len()).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() <= RANK_TOL {
            continue;
        }
        m.swap(rank, piv);
        for r in 0..m.len() {
            if r != rank {
                let f = m[r][col] / m[rank][col];
                if f != 0.0 {
                    for c in col..=n {
                        m[r][c] -= f * m[rank][c];
                    }
                }
            }
        }
        rank += 1;
    }
    if m[rank..].iter().any(|row| row[n].abs() > RANK_TOL) {
        return None;
    }
    m.truncate(rank);
    let rhs = m.iter_mut().map(|row| row.pop().unwrap()).collect();
    Some((m, rhs))
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}
