//! Dense two-phase primal simplex.
//!
//! Every LP-backed operation in the crate goes through [`solve_lp`]. Programs
//! are small (at most a few thousand variables), so the tableau is stored
//! densely and pivots follow Bland's rule, which makes the result a
//! deterministic function of the input.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Reduced-cost and feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Smallest tableau entry accepted as a pivot.
pub const PIVOT_TOL: f64 = 1e-11;
const RATIO_TIE: f64 = 1e-12;

/// `min c.x` subject to `eq_rows x = eq_rhs`, `le_rows x <= le_rhs`,
/// `lower <= x <= upper`.
///
/// Empty `lower` means all zeros; empty `upper` means no upper bounds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    #[serde(default)]
    pub eq_rows: Vec<Vec<f64>>,
    #[serde(default)]
    pub eq_rhs: Vec<f64>,
    #[serde(default)]
    pub le_rows: Vec<Vec<f64>>,
    #[serde(default)]
    pub le_rhs: Vec<f64>,
    #[serde(default)]
    pub lower: Vec<f64>,
    #[serde(default)]
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }

    /// `row . x >= rhs`, stored as a negated `<=` row.
    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs);
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) {
        let n = self.num_vars();
        if self.lower.is_empty() {
            self.lower = vec![0.0; n];
        }
        if self.upper.is_empty() {
            self.upper = vec![None; n];
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    fn lower_bound(&self, j: usize) -> f64 {
        self.lower.get(j).copied().unwrap_or(0.0)
    }

    fn upper_bound(&self, j: usize) -> Option<f64> {
        self.upper.get(j).copied().flatten()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(invalid("LP has no variables"));
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.le_rows.len() != self.le_rhs.len() {
            return Err(invalid("constraint rows and right-hand sides differ in count"));
        }
        if !(self.lower.is_empty() || self.lower.len() == n) || !(self.upper.is_empty() || self.upper.len() == n) {
            return Err(invalid("bound vectors must be empty or match the variable count"));
        }
        let rows = self.eq_rows.iter().chain(&self.le_rows);
        for row in rows {
            if row.len() != n {
                return Err(invalid(format!("row of length {} in a program with {n} variables", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid("non-finite constraint coefficient"));
            }
        }
        let scalars = self
            .objective
            .iter()
            .chain(&self.eq_rhs)
            .chain(&self.le_rhs)
            .chain(&self.lower);
        if scalars.clone().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite objective, rhs or lower bound"));
        }
        for j in 0..n {
            if let Some(u) = self.upper_bound(j) {
                if !u.is_finite() || u < self.lower_bound(j) {
                    return Err(invalid(format!("bad upper bound on variable {j}")));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let mut worst: f64 = 0.0;
        for (row, &b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row) - b).abs());
        }
        for (row, &b) in self.le_rows.iter().zip(&self.le_rhs) {
            worst = worst.max(dot(row) - b);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower_bound(j) - v);
            if let Some(u) = self.upper_bound(j) {
                worst = worst.max(v - u);
            }
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless the status is optimal.
    pub values: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            max_violation: f64::INFINITY,
        }
    }
}

/// Solves `lp`. Infeasible and unbounded programs are reported through the
/// status; only malformed programs produce an error.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    Solver::new(lp, false)?.run()
}

/// Like [`solve_lp`], also returning a text log of every pivot and the final
/// tableau.
pub fn solve_lp_logged(lp: &LinearProgram) -> Result<(LpSolution, String)> {
    let mut s = Solver::new(lp, true)?;
    let sol = s.run()?;
    Ok((sol, s.log.unwrap_or_default()))
}

/// Equality standard form `A y = b`, `y >= 0`, `b >= 0`, with `y` the shifted
/// structural variables followed by one slack per inequality row.
struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    // row index -> slack column that can start in the basis
    natural_basis: Vec<Option<usize>>,
}

fn standard_form(lp: &LinearProgram) -> StandardForm {
    let n = lp.num_vars();
    let shift: Vec<f64> = (0..n).map(|j| lp.lower_bound(j)).collect();
    let shifted_rhs = |row: &[f64], rhs: f64| rhs - row.iter().zip(&shift).map(|(a, l)| a * l).sum::<f64>();

    let mut ineq: Vec<(Vec<f64>, f64)> = lp
        .le_rows
        .iter()
        .zip(&lp.le_rhs)
        .map(|(r, &b)| (r.clone(), shifted_rhs(r, b)))
        .collect();
    for j in 0..n {
        if let Some(u) = lp.upper_bound(j) {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            ineq.push((row, u - shift[j]));
        }
    }
    let ns = ineq.len();
    let ncols = n + ns;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut natural_basis = Vec::new();
    for (row, &rhs) in lp.eq_rows.iter().zip(&lp.eq_rhs) {
        let mut full = row.clone();
        full.resize(ncols, 0.0);
        let mut rhs = shifted_rhs(row, rhs);
        if rhs < 0.0 {
            full.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        a.push(full);
        b.push(rhs);
        natural_basis.push(None);
    }
    for (k, (row, mut rhs)) in ineq.into_iter().enumerate() {
        let mut full = row;
        full.resize(ncols, 0.0);
        full[n + k] = 1.0;
        let mut natural = Some(n + k);
        if rhs < 0.0 {
            full.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
            natural = None;
        }
        a.push(full);
        b.push(rhs);
        natural_basis.push(natural);
    }
    let mut c = lp.objective.clone();
    c.resize(ncols, 0.0);
    StandardForm { a, b, c, natural_basis }
}

enum SimplexEnd {
    Optimal,
    Unbounded,
}

struct Solver<'a> {
    lp: &'a LinearProgram,
    sf: StandardForm,
    // tableau rows, each of length ncols + 1 with the rhs last
    rows: Vec<Vec<f64>>,
    // original row index of each tableau row
    origin: Vec<usize>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    nreal: usize,
    ncols: usize,
    log: Option<String>,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a LinearProgram, logged: bool) -> Result<Self> {
        lp.validate()?;
        let sf = standard_form(lp);
        let nreal = sf.c.len();
        let m = sf.a.len();
        let nart = sf.natural_basis.iter().filter(|s| s.is_none()).count();
        let ncols = nreal + nart;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_art = nreal;
        for i in 0..m {
            let mut row = sf.a[i].clone();
            row.resize(ncols + 1, 0.0);
            row[ncols] = sf.b[i];
            match sf.natural_basis[i] {
                Some(s) => basis.push(s),
                None => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        Ok(Self {
            lp,
            sf,
            rows,
            origin: (0..m).collect(),
            cost: vec![0.0; ncols + 1],
            basis,
            nreal,
            ncols,
            log: logged.then(String::new),
        })
    }

    fn note(&mut self, f: impl FnOnce() -> String) {
        if let Some(log) = self.log.as_mut() {
            log.push_str(&f());
            log.push('\n');
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let leaving = self.basis[r];
        self.note(|| format!("pivot row {r}: enter y{c}, leave y{leaving}"));
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rows[r][c] = 1.0;
        let pr = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, &q) in row.iter_mut().zip(&pr) {
                    *v -= f * q;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, &q) in self.cost.iter_mut().zip(&pr) {
                *v -= f * q;
            }
            self.cost[c] = 0.0;
        }
        self.rows[r] = pr;
        self.basis[r] = c;
    }

    /// Bland's rule: lowest-index improving column, then the minimum-ratio
    /// row with the lowest-index basic variable among ties.
    fn simplex(&mut self, allowed: usize) -> Result<SimplexEnd> {
        let m = self.rows.len();
        let limit = 200_000 + 50 * (m + self.ncols) * (m + 1);
        for _ in 0..limit {
            let Some(c) = (0..allowed).find(|&j| self.cost[j] < -FEAS_TOL) else {
                return Ok(SimplexEnd::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.rows[r][c];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rows[r][self.ncols].max(0.0) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let better = ratio < bratio - RATIO_TIE
                            || ((ratio - bratio).abs() <= RATIO_TIE && self.basis[r] < self.basis[br]);
                        Some(if better { (r, ratio) } else { (br, bratio) })
                    }
                };
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Ok(SimplexEnd::Unbounded),
            }
        }
        Err(Error::Lp("stalled: simplex iteration limit reached".into()))
    }

    fn run(&mut self) -> Result<LpSolution> {
        let m = self.rows.len();
        let (nreal, nart) = (self.nreal, self.ncols - self.nreal);
        self.note(|| format!("standard form: {m} rows, {nreal} columns, {nart} artificial"));

        // phase 1: minimize the sum of artificials
        if self.ncols > self.nreal {
            for r in 0..m {
                if self.basis[r] >= self.nreal {
                    for j in 0..=self.ncols {
                        if j < self.nreal || j == self.ncols {
                            self.cost[j] -= self.rows[r][j];
                        }
                    }
                }
            }
            self.note(|| "phase 1".into());
            self.simplex(self.ncols)?;
            let infeasibility = -self.cost[self.ncols];
            self.note(|| format!("phase 1 objective {infeasibility:e}"));
            if infeasibility > FEAS_TOL {
                self.dump();
                return Ok(LpSolution::without_point(LpStatus::Infeasible));
            }
            self.drive_out_artificials();
        }

        // phase 2
        self.cost = vec![0.0; self.ncols + 1];
        self.cost[..self.nreal].copy_from_slice(&self.sf.c);
        for r in 0..self.rows.len() {
            let cb = self.cost_of(self.basis[r]);
            if cb != 0.0 {
                for j in 0..=self.ncols {
                    self.cost[j] -= cb * self.rows[r][j];
                }
            }
        }
        self.note(|| "phase 2".into());
        let end = self.simplex(self.nreal)?;
        self.dump();
        if let SimplexEnd::Unbounded = end {
            return Ok(LpSolution::without_point(LpStatus::Unbounded));
        }
        Ok(self.extract())
    }

    fn cost_of(&self, col: usize) -> f64 {
        if col < self.nreal {
            self.sf.c[col]
        } else {
            0.0
        }
    }

    fn drive_out_artificials(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] < self.nreal {
                r += 1;
                continue;
            }
            self.rows[r][self.ncols] = 0.0;
            let (best, size) = (0..self.nreal)
                .map(|j| (j, self.rows[r][j].abs()))
                .fold((usize::MAX, 0.0), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
            if size > PIVOT_TOL {
                self.pivot(r, best);
                r += 1;
            } else {
                let o = self.origin[r];
                self.note(|| format!("dropping redundant row {o}"));
                self.rows.remove(r);
                self.basis.remove(r);
                self.origin.remove(r);
            }
        }
    }

    fn extract(&self) -> LpSolution {
        let mut y = vec![0.0; self.nreal];
        for (r, &b) in self.basis.iter().enumerate() {
            y[b] = self.rows[r][self.ncols].max(0.0);
        }
        let tableau_x = self.unshift(&y);
        let mut x = tableau_x.clone();
        if let Some(refined) = self.refine() {
            let candidate = self.unshift(&refined);
            if self.lp.max_violation(&candidate) <= self.lp.max_violation(&tableau_x) {
                x = candidate;
            }
        }
        LpSolution {
            status: LpStatus::Optimal,
            objective: self.lp.objective_at(&x),
            max_violation: self.lp.max_violation(&x),
            values: x,
        }
    }

    fn unshift(&self, y: &[f64]) -> Vec<f64> {
        (0..self.lp.num_vars()).map(|j| y[j] + self.lp.lower_bound(j)).collect()
    }

    /// Re-solves `B y_B = b` on the untouched standard-form rows to shed the
    /// round-off accumulated by pivoting.
    fn refine(&self) -> Option<Vec<f64>> {
        let k = self.basis.len();
        let mut mat: Vec<Vec<f64>> = self
            .origin
            .iter()
            .map(|&o| {
                let mut row: Vec<f64> = self.basis.iter().map(|&b| self.sf.a[o][b]).collect();
                row.push(self.sf.b[o]);
                row
            })
            .collect();
        let sol = gauss_solve(&mut mat, k)?;
        let mut y = vec![0.0; self.nreal];
        for (&b, v) in self.basis.iter().zip(sol) {
            if v < -FEAS_TOL {
                return None;
            }
            y[b] = v.max(0.0);
        }
        Some(y)
    }

    fn dump(&mut self) {
        if self.log.is_none() {
            return;
        }
        let mut s = String::from("final tableau (basis | row | rhs)\n");
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(s, "y{:<4}|", self.basis[r]);
            for v in &row[..self.ncols] {
                let _ = write!(s, " {v:>9.4}");
            }
            let _ = writeln!(s, " | {:>11.6}", row[self.ncols]);
        }
        let _ = write!(s, "cost |");
        for v in &self.cost[..self.ncols] {
            let _ = write!(s, " {v:>9.4}");
        }
        let _ = write!(s, " | {:>11.6}", -self.cost[self.ncols]);
        self.note(|| s);
    }
}

/// Gaussian elimination with partial pivoting on an augmented `k x (k+1)`
/// matrix. `None` when singular.
pub(crate) fn gauss_solve(mat: &mut [Vec<f64>], k: usize) -> Option<Vec<f64>> {
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()))?;
        if mat[piv][col].abs() <= PIVOT_TOL {
            return None;
        }
        mat.swap(col, piv);
        for r in col + 1..k {
            let f = mat[r][col] / mat[col][col];
            if f != 0.0 {
                for c in col..=k {
                    mat[r][c] -= f * mat[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| mat[r][c] * x[c]).sum();
        x[r] = (mat[r][k] - s) / mat[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_ge(vec![1.0], 3.0);
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert!((s.values[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_transport_identity() {
        // x_ij, cost |i - j|
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.0, 1.0, 1.0, 0.0];
        lp.add_eq(vec![1.0, 1.0, 0.0, 0.0], 0.5);
        lp.add_eq(vec![0.0, 0.0, 1.0, 1.0], 0.5);
        lp.add_eq(vec![1.0, 0.0, 1.0, 0.0], 0.5);
        lp.add_eq(vec![0.0, 1.0, 0.0, 1.0], 0.5);
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert!(s.objective.abs() < 1e-12);
        assert!((s.values[0] - 0.5).abs() < 1e-12 && (s.values[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![1.0, -1.0], 3.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.add_le(vec![-1.0, 1.0], 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn bounds_are_shifted_and_capped() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -2.0];
        lp.set_bounds(0, -1.0, Some(2.0));
        lp.set_bounds(1, 1.0, Some(1.5));
        lp.add_le(vec![1.0, 1.0], 3.0);
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert!((s.values[0] - 1.5).abs() < 1e-12);
        assert!((s.values[1] - 1.5).abs() < 1e-12);
        assert!(s.max_violation <= 1e-12);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0], 2.0);
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_program_is_an_error() {
        let mut lp = LinearProgram::new(2);
        lp.add_eq(vec![1.0], 1.0);
        assert!(solve_lp(&lp).is_err());
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![f64::NAN];
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn resolve_is_bit_identical() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![0.3, -0.7, 0.11];
        lp.add_eq(vec![1.0, 1.0, 1.0], 1.0);
        lp.add_le(vec![0.0, 1.0, -0.5], 0.4);
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_mentions_pivots() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_ge(vec![1.0], 3.0);
        let (_, log) = solve_lp_logged(&lp).unwrap();
        assert!(log.contains("pivot"));
        assert!(log.contains("final tableau"));
    }
}
