//! Finitely supported measures on the line and couplings on the plane.
//!
//! A [`DiscreteMeasure`] keeps strictly increasing atoms with positive weights
//! summing to one. A [`DiscreteCoupling`] keeps its point list sorted by
//! `(x1, x2)` and caches both marginals and the disintegration kernel
//! `x1 -> pi_{x1}` computed from that list.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Locations closer than this are treated as the same atom.
pub const ATOM_MERGE_TOL: f64 = 1e-12;
/// Default absolute tolerance on per-atom barycentre deviations.
pub const DEFAULT_TOL_MART: f64 = 1e-9;
/// Slack used by [`convex_order`] for the mean and call-price comparisons.
pub const ORDER_TOL: f64 = 1e-10;
/// Remaining masses closer than this are one quantile breakpoint.
const QUANTILE_TIE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds a measure from raw atoms and weights: sorts, merges duplicate
/// locations, drops zero weights and renormalizes to total mass one.
pub fn make_measure(atoms: &[f64], weights: &[f64]) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(atoms, weights)
}

impl DiscreteMeasure {
    pub fn new(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(invalid(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(invalid("empty measure"));
        }
        let mut pairs = Vec::with_capacity(atoms.len());
        for (&x, &w) in atoms.iter().zip(weights) {
            if !x.is_finite() || !w.is_finite() {
                return Err(invalid("non-finite atom or weight"));
            }
            if w < 0.0 {
                return Err(invalid(format!("negative weight {w} at {x}")));
            }
            if w > 0.0 {
                pairs.push((x, w));
            }
        }
        if pairs.is_empty() {
            return Err(invalid("total weight is zero"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut out_atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut out_weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match out_atoms.last() {
                Some(&last) if x - last <= ATOM_MERGE_TOL => {
                    *out_weights.last_mut().unwrap() += w;
                }
                _ => {
                    out_atoms.push(x);
                    out_weights.push(w);
                }
            }
        }
        let total: f64 = out_weights.iter().sum();
        if total != 1.0 {
            for w in &mut out_weights {
                *w /= total;
            }
        }
        Ok(Self {
            atoms: out_atoms,
            weights: out_weights,
        })
    }

    /// Caller guarantees sorted distinct atoms and positive weights.
    pub(crate) fn from_sorted_unchecked(atoms: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(atoms.len(), weights.len());
        debug_assert!(atoms.windows(2).all(|w| w[0] < w[1]));
        Self { atoms, weights }
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            atoms: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn uniform(atoms: &[f64]) -> Result<Self> {
        let w = vec![1.0; atoms.len()];
        Self::new(atoms, &w)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, w)| x * w).sum()
    }

    /// Raw moment `sum w * x^k`.
    pub fn moment(&self, k: i32) -> f64 {
        self.iter().map(|(x, w)| w * x.powi(k)).sum()
    }

    /// `sum w * (x - strike)^+`.
    pub fn call_value(&self, strike: f64) -> f64 {
        self.iter().map(|(x, w)| w * (x - strike).max(0.0)).sum()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        locate(&self.atoms, x)
    }

    pub fn weight_at(&self, x: f64) -> f64 {
        self.index_of(x).map_or(0.0, |i| self.weights[i])
    }

    pub fn to_json(&self) -> MeasureJson {
        MeasureJson {
            atoms: self.atoms.clone(),
            weights: self.weights.clone(),
        }
    }

    /// Parses `{"atoms": [...], "weights": [...]}`. Weight sums off by more
    /// than `1e-6` are rejected, smaller deviations are renormalized away.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: MeasureJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_measure()
    }
}

/// Index of `x` in a sorted slice, matching within [`ATOM_MERGE_TOL`].
pub(crate) fn locate(sorted: &[f64], x: f64) -> Option<usize> {
    let i = sorted.partition_point(|&a| a < x - ATOM_MERGE_TOL);
    (i < sorted.len() && (sorted[i] - x).abs() <= ATOM_MERGE_TOL).then_some(i)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureJson {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MeasureJson {
    pub fn into_measure(self) -> Result<DiscreteMeasure> {
        check_total(&self.weights)?;
        DiscreteMeasure::new(&self.atoms, &self.weights).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingJson {
    pub points: Vec<[f64; 3]>,
}

impl CouplingJson {
    pub fn into_coupling(self) -> Result<DiscreteCoupling> {
        let ws: Vec<f64> = self.points.iter().map(|p| p[2]).collect();
        check_total(&ws)?;
        DiscreteCoupling::new(self.points.iter().map(|p| (p[0], p[1], p[2])))
            .map_err(|e| Error::Parse(e.to_string()))
    }
}

fn check_total(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Parse("non-finite weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Parse(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Dense view of a coupling: rows are first-marginal atoms, columns are
/// second-marginal atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGrid {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub mass: Vec<Vec<f64>>,
}

impl CouplingGrid {
    pub fn row_mass(&self, i: usize) -> f64 {
        self.mass[i].iter().sum()
    }

    pub fn col_mass(&self, j: usize) -> f64 {
        self.mass.iter().map(|r| r[j]).sum()
    }

    /// `sum_j (x2_j - x1_i) * mass_ij`, i.e. `mu(x1) * deviation(x1)`.
    pub fn weighted_deviation(&self, i: usize) -> f64 {
        let x1 = self.x1[i];
        self.mass[i]
            .iter()
            .zip(&self.x2)
            .map(|(&m, &y)| m * (y - x1))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCoupling {
    points: Vec<(f64, f64, f64)>,
    first: DiscreteMeasure,
    second: DiscreteMeasure,
    kernel: Vec<DiscreteMeasure>,
    // rows[i] is the range of `points` with x1 == first.atoms[i]
    rows: Vec<std::ops::Range<usize>>,
}

impl DiscreteCoupling {
    /// Builds a coupling from `(x1, x2, w)` triples. Coordinates within
    /// [`ATOM_MERGE_TOL`] are merged, zero weights dropped, and the total is
    /// renormalized to one.
    pub fn new(points: impl IntoIterator<Item = (f64, f64, f64)>) -> Result<Self> {
        let mut pts: Vec<(f64, f64, f64)> = Vec::new();
        for (a, b, w) in points {
            if !(a.is_finite() && b.is_finite() && w.is_finite()) {
                return Err(invalid("non-finite coupling entry"));
            }
            if w < 0.0 {
                return Err(invalid(format!("negative weight {w} at ({a}, {b})")));
            }
            if w > 0.0 {
                pts.push((a, b, w));
            }
        }
        if pts.is_empty() {
            return Err(invalid("empty coupling"));
        }
        let x1s = snap_values(pts.iter().map(|p| p.0).collect());
        let x2s = snap_values(pts.iter().map(|p| p.1).collect());
        for p in &mut pts {
            p.0 = x1s[locate(&x1s, p.0).unwrap()];
            p.1 = x2s[locate(&x2s, p.1).unwrap()];
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut merged: Vec<(f64, f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            match merged.last_mut() {
                Some(last) if last.0 == p.0 && last.1 == p.1 => last.2 += p.2,
                _ => merged.push(p),
            }
        }
        let total: f64 = merged.iter().map(|p| p.2).sum();
        if total != 1.0 {
            for p in &mut merged {
                p.2 /= total;
            }
        }
        Ok(Self::from_sorted_points(merged))
    }

    /// Builds a coupling from a dense grid without renormalizing. Cells with
    /// non-positive mass are skipped.
    pub fn from_grid(x1: &[f64], x2: &[f64], mass: &[Vec<f64>]) -> Result<Self> {
        if mass.len() != x1.len() || mass.iter().any(|r| r.len() != x2.len()) {
            return Err(invalid("grid dimensions do not match its axes"));
        }
        if !x1.windows(2).all(|w| w[0] < w[1]) || !x2.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("grid axes must be strictly increasing"));
        }
        let mut pts = Vec::new();
        for (i, row) in mass.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if !m.is_finite() {
                    return Err(invalid("non-finite grid mass"));
                }
                if m > 0.0 {
                    pts.push((x1[i], x2[j], m));
                }
            }
        }
        if pts.is_empty() {
            return Err(invalid("empty grid"));
        }
        Ok(Self::from_sorted_points(pts))
    }

    fn from_sorted_points(points: Vec<(f64, f64, f64)>) -> Self {
        let mut rows = Vec::new();
        let mut first_atoms = Vec::new();
        let mut first_weights = Vec::new();
        let mut kernel = Vec::new();
        let mut start = 0;
        while start < points.len() {
            let x1 = points[start].0;
            let mut end = start;
            let mut mass = 0.0;
            while end < points.len() && points[end].0 == x1 {
                mass += points[end].2;
                end += 1;
            }
            let atoms: Vec<f64> = points[start..end].iter().map(|p| p.1).collect();
            let weights: Vec<f64> = points[start..end].iter().map(|p| p.2 / mass).collect();
            kernel.push(DiscreteMeasure::from_sorted_unchecked(atoms, weights));
            first_atoms.push(x1);
            first_weights.push(mass);
            rows.push(start..end);
            start = end;
        }
        let mut cols: Vec<(f64, f64)> = points.iter().map(|p| (p.1, p.2)).collect();
        cols.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut second_atoms: Vec<f64> = Vec::new();
        let mut second_weights: Vec<f64> = Vec::new();
        for (x, w) in cols {
            if second_atoms.last() == Some(&x) {
                *second_weights.last_mut().unwrap() += w;
            } else {
                second_atoms.push(x);
                second_weights.push(w);
            }
        }
        Self {
            points,
            first: DiscreteMeasure::from_sorted_unchecked(first_atoms, first_weights),
            second: DiscreteMeasure::from_sorted_unchecked(second_atoms, second_weights),
            kernel,
            rows,
        }
    }

    /// `mu ⊗ nu`.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let mut pts = Vec::with_capacity(mu.len() * nu.len());
        for (x, a) in mu.iter() {
            for (y, b) in nu.iter() {
                pts.push((x, y, a * b));
            }
        }
        Self::from_sorted_points(pts)
    }

    /// Coupling concentrated on the diagonal `x1 == x2`.
    pub fn identity(mu: &DiscreteMeasure) -> Self {
        Self::from_sorted_points(mu.iter().map(|(x, w)| (x, x, w)).collect())
    }

    /// `mu ⊗ kernel`, with `kernel[i]` the conditional law at `mu.atoms()[i]`.
    pub fn from_kernel(mu: &DiscreteMeasure, kernel: &[DiscreteMeasure]) -> Result<Self> {
        if kernel.len() != mu.len() {
            return Err(invalid("kernel length differs from the number of atoms"));
        }
        let pts = mu
            .iter()
            .zip(kernel)
            .flat_map(|((x, w), k)| k.iter().map(move |(y, v)| (x, y, w * v)));
        Self::new(pts)
    }

    pub fn points(&self) -> &[(f64, f64, f64)] {
        &self.points
    }

    pub fn first_marginal(&self) -> &DiscreteMeasure {
        &self.first
    }

    pub fn second_marginal(&self) -> &DiscreteMeasure {
        &self.second
    }

    /// Disintegration kernel aligned with `first_marginal().atoms()`.
    pub fn kernel(&self) -> &[DiscreteMeasure] {
        &self.kernel
    }

    pub fn kernel_at(&self, x1: f64) -> Option<&DiscreteMeasure> {
        self.first.index_of(x1).map(|i| &self.kernel[i])
    }

    /// Points of the row for the `i`-th first-marginal atom.
    pub fn row(&self, i: usize) -> &[(f64, f64, f64)] {
        &self.points[self.rows[i].clone()]
    }

    pub fn mass_at(&self, x1: f64, x2: f64) -> f64 {
        match self.first.index_of(x1) {
            Some(i) => self
                .row(i)
                .iter()
                .find(|p| (p.1 - x2).abs() <= ATOM_MERGE_TOL)
                .map_or(0.0, |p| p.2),
            None => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral of `f(x1, x2)`.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points.iter().map(|&(a, b, w)| w * f(a, b)).sum()
    }

    pub fn to_grid(&self) -> CouplingGrid {
        let x1 = self.first.atoms.clone();
        let x2 = self.second.atoms.clone();
        let mut mass = vec![vec![0.0; x2.len()]; x1.len()];
        for (i, range) in self.rows.iter().enumerate() {
            for &(_, b, w) in &self.points[range.clone()] {
                let j = locate(&x2, b).unwrap();
                mass[i][j] += w;
            }
        }
        CouplingGrid { x1, x2, mass }
    }

    pub fn to_json(&self) -> CouplingJson {
        CouplingJson {
            points: self.points.iter().map(|&(a, b, w)| [a, b, w]).collect(),
        }
    }

    /// Parses `{"points": [[x1, x2, w], ...]}` with the same weight-sum rule
    /// as [`DiscreteMeasure::from_json_str`].
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: CouplingJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        raw.into_coupling()
    }
}

fn snap_values(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(&last) if x - last <= ATOM_MERGE_TOL => {}
            _ => out.push(x),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarycentreClass {
    Plus,
    Zero,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomDeviation {
    pub x1: f64,
    pub mass: f64,
    /// `int (x2 - x1) pi_{x1}(dx2)`
    pub deviation: f64,
    pub class: BarycentreClass,
}

/// Per-atom barycentre deviations of a coupling and their `mu`-weighted
/// absolute sum `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarycentreReport {
    pub per_atom: Vec<AtomDeviation>,
    pub epsilon: f64,
    pub tol_mart: f64,
}

impl BarycentreReport {
    pub fn atoms_in(&self, class: BarycentreClass) -> impl Iterator<Item = &AtomDeviation> {
        self.per_atom.iter().filter(move |a| a.class == class)
    }

    pub fn count(&self, class: BarycentreClass) -> usize {
        self.atoms_in(class).count()
    }
}

pub(crate) fn classify(deviation: f64, tol: f64) -> BarycentreClass {
    if deviation > tol {
        BarycentreClass::Plus
    } else if deviation < -tol {
        BarycentreClass::Minus
    } else {
        BarycentreClass::Zero
    }
}

pub fn barycentre_report(pi: &DiscreteCoupling, tol_mart: f64) -> BarycentreReport {
    let mut per_atom = Vec::with_capacity(pi.first.len());
    let mut epsilon = 0.0;
    for (i, (x1, mass)) in pi.first.iter().enumerate() {
        let deviation = pi.kernel[i].mean() - x1;
        epsilon += mass * deviation.abs();
        per_atom.push(AtomDeviation {
            x1,
            mass,
            deviation,
            class: classify(deviation, tol_mart),
        });
    }
    BarycentreReport {
        per_atom,
        epsilon,
        tol_mart,
    }
}

/// Strassen check: equal means and `E_mu (x-k)^+ <= E_nu (x-k)^+` at every
/// atom `k` of either measure. The call-price gap is piecewise linear with
/// kinks only at atoms, so these strikes suffice.
pub fn convex_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    if (mu.mean() - nu.mean()).abs() > ORDER_TOL {
        return false;
    }
    mu.atoms
        .iter()
        .chain(nu.atoms.iter())
        .all(|&k| mu.call_value(k) <= nu.call_value(k) + ORDER_TOL)
}

/// Tail sums `int_{x1 >= x} (x2 - x1) dpi` for every atom `x` of the first
/// marginal, in increasing order of `x`.
pub fn dispersion_tails(pi: &DiscreteCoupling) -> Vec<(f64, f64)> {
    let mut tails = vec![(0.0, 0.0); pi.first.len()];
    let mut acc = 0.0;
    for i in (0..pi.first.len()).rev() {
        let x1 = pi.first.atoms[i];
        acc += pi.row(i).iter().map(|p| p.2 * (p.1 - x1)).sum::<f64>();
        tails[i] = (x1, acc);
    }
    tails
}

/// Barycentre dispersion: every upper-tail sum is `>= -tol`.
pub fn check_dispersion(pi: &DiscreteCoupling, tol: f64) -> bool {
    dispersion_tails(pi).iter().all(|&(_, t)| t >= -tol)
}

/// Quantile pairing of two measures: `(i, j, mass)` segments of the
/// comonotone coupling, in increasing order of both indices.
pub(crate) fn quantile_segments(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<(usize, usize, f64)> {
    north_west(&mu.weights, &nu.weights)
}

/// North-west corner rule on two weight vectors of equal total: fills cells
/// `(i, j)` in order, advancing whichever side is exhausted first.
pub(crate) fn north_west(a: &[f64], b: &[f64]) -> Vec<(usize, usize, f64)> {
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    let mut out = Vec::with_capacity(a.len() + b.len());
    loop {
        let tie = (ra - rb).abs() <= QUANTILE_TIE;
        let mass = ra.min(rb);
        if mass > 0.0 {
            out.push((i, j, mass));
        }
        let (next_i, next_j) = match (tie, ra < rb) {
            (true, _) => (true, true),
            (false, true) => (true, false),
            (false, false) => (false, true),
        };
        ra -= mass;
        rb -= mass;
        if next_i {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i];
        }
        if next_j {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j];
        }
    }
    out
}

/// The comonotone (Hoeffding–Fréchet) coupling of `mu` and `nu`.
pub fn hoeffding_frechet(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> DiscreteCoupling {
    let pts = quantile_segments(mu, nu)
        .into_iter()
        .map(|(i, j, m)| (mu.atoms[i], nu.atoms[j], m))
        .collect();
    DiscreteCoupling::from_sorted_points(pts)
}

/// `x1 < y1` implies `x2 <= y2` on the support.
pub fn is_monotone_support(pi: &DiscreteCoupling) -> bool {
    let mut max_below = f64::NEG_INFINITY;
    for i in 0..pi.first.len() {
        let row = pi.row(i);
        let lo = row.first().unwrap().1;
        let hi = row.last().unwrap().1;
        if lo < max_below {
            return false;
        }
        max_below = max_below.max(hi);
    }
    true
}

pub fn is_martingale(pi: &DiscreteCoupling, tol_mart: f64) -> bool {
    barycentre_report(pi, tol_mart)
        .per_atom
        .iter()
        .all(|a| a.deviation.abs() <= tol_mart)
}

impl PartialOrd for BarycentreClass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BarycentreClass {
    fn cmp(&self, other: &Self) -> Ordering {
        let rank = |c: &Self| match c {
            Self::Minus => 0,
            Self::Zero => 1,
            Self::Plus => 2,
        };
        rank(self).cmp(&rank(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a: &[f64], w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(a, w).unwrap()
    }

    #[test]
    fn make_measure_merges_sorts_and_drops() {
        let mu = m(&[1.0, 1.0, 2.0], &[0.25, 0.25, 0.5]);
        assert_eq!(mu.atoms(), &[1.0, 2.0]);
        assert_eq!(mu.weights(), &[0.5, 0.5]);

        let d = m(&[0.0], &[1.0]);
        assert_eq!(d, DiscreteMeasure::dirac(0.0));

        let s = m(&[3.0, 1.0], &[0.5, 0.5]);
        assert_eq!(s.atoms(), &[1.0, 3.0]);

        let z = m(&[0.0, 5.0, 7.0], &[1.0, 0.0, 3.0]);
        assert_eq!(z.atoms(), &[0.0, 7.0]);
        assert_eq!(z.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn make_measure_errors() {
        assert!(make_measure(&[], &[]).is_err());
        assert!(make_measure(&[0.0, 1.0], &[0.5, -0.5]).is_err());
        assert!(make_measure(&[0.0], &[0.0]).is_err());
        assert!(make_measure(&[f64::NAN], &[1.0]).is_err());
        assert!(make_measure(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn nearby_atoms_merge() {
        let mu = m(&[1.0, 1.0 + 1e-13, 2.0], &[1.0, 1.0, 2.0]);
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn convex_order_examples() {
        let d0 = DiscreteMeasure::dirac(0.0);
        let pm = m(&[-1.0, 1.0], &[0.5, 0.5]);
        assert!(convex_order(&d0, &pm));
        assert!(!convex_order(&pm, &d0));
        assert!(convex_order(&pm, &pm));
        // different means
        assert!(!convex_order(&d0, &DiscreteMeasure::dirac(0.1)));
    }

    #[test]
    fn hoeffding_frechet_examples() {
        let pi = hoeffding_frechet(&m(&[0.0, 1.0], &[0.5, 0.5]), &m(&[2.0, 3.0], &[0.5, 0.5]));
        assert_eq!(pi.points(), &[(0.0, 2.0, 0.5), (1.0, 3.0, 0.5)]);

        let nu = m(&[-1.0, 0.5, 2.0], &[0.2, 0.3, 0.5]);
        let pi = hoeffding_frechet(&DiscreteMeasure::dirac(0.0), &nu);
        assert_eq!(pi, DiscreteCoupling::product(&DiscreteMeasure::dirac(0.0), &nu));

        // breakpoints 1/4, 1/2, 1
        let pi = hoeffding_frechet(&m(&[0.0, 1.0], &[0.25, 0.75]), &m(&[0.0, 2.0], &[0.5, 0.5]));
        assert_eq!(pi.points(), &[(0.0, 0.0, 0.25), (1.0, 0.0, 0.25), (1.0, 2.0, 0.5)]);
    }

    #[test]
    fn monotone_support_examples() {
        let mu = m(&[0.0, 1.0, 3.0], &[0.2, 0.3, 0.5]);
        let nu = m(&[-2.0, 1.0, 4.0, 5.0], &[0.1, 0.4, 0.25, 0.25]);
        assert!(is_monotone_support(&hoeffding_frechet(&mu, &nu)));
        let anti = DiscreteCoupling::new([(0.0, 2.0, 0.5), (2.0, 0.0, 0.5)]).unwrap();
        assert!(!is_monotone_support(&anti));
        assert!(is_monotone_support(&DiscreteCoupling::product(&DiscreteMeasure::dirac(0.0), &nu)));
    }

    #[test]
    fn dispersion_examples() {
        let anti = DiscreteCoupling::new([(0.0, 2.0, 0.5), (2.0, 0.0, 0.5)]).unwrap();
        let tails = dispersion_tails(&anti);
        assert_eq!(tails[1], (2.0, -1.0));
        assert!(!check_dispersion(&anti, 1e-12));

        let mart = DiscreteCoupling::product(&DiscreteMeasure::dirac(0.0), &m(&[-1.0, 1.0], &[0.5, 0.5]));
        assert!(check_dispersion(&mart, 0.0));
        assert!(is_martingale(&mart, DEFAULT_TOL_MART));
    }

    #[test]
    fn report_on_martingale_and_identity() {
        let mu = m(&[1.0, 2.0, 5.0], &[0.2, 0.3, 0.5]);
        let id = DiscreteCoupling::identity(&mu);
        let r = barycentre_report(&id, DEFAULT_TOL_MART);
        assert_eq!(r.epsilon, 0.0);
        assert!(r.per_atom.iter().all(|a| a.class == BarycentreClass::Zero));
        assert!(is_martingale(&id, DEFAULT_TOL_MART));
    }

    #[test]
    fn coupling_caches_are_consistent() {
        let pi = DiscreteCoupling::new([(1.0, 3.0, 0.2), (0.0, 1.0, 0.3), (1.0, -1.0, 0.2), (0.0, 1.0, 0.3)]).unwrap();
        assert_eq!(pi.len(), 3);
        assert_eq!(pi.first_marginal().atoms(), &[0.0, 1.0]);
        assert_eq!(pi.second_marginal().atoms(), &[-1.0, 1.0, 3.0]);
        assert_eq!(pi.kernel()[1].weights(), &[0.5, 0.5]);
        let g = pi.to_grid();
        assert_eq!(g.mass, vec![vec![0.0, 0.6, 0.0], vec![0.2, 0.0, 0.2]]);
        assert_eq!(DiscreteCoupling::from_grid(&g.x1, &g.x2, &g.mass).unwrap(), pi);
    }

    #[test]
    fn json_schema_rules() {
        let mu = DiscreteMeasure::from_json_str(r#"{"atoms":[0,1],"weights":[0.5,0.5000001]}"#).unwrap();
        assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(DiscreteMeasure::from_json_str(r#"{"atoms":[0,1],"weights":[0.5,0.6]}"#).is_err());
        assert!(DiscreteMeasure::from_json_str(r#"{"atoms":[0,1],"weights":[0.5"#).is_err());
        let pi = DiscreteCoupling::from_json_str(r#"{"points":[[0,1,0.5],[0,-1,0.5]]}"#).unwrap();
        assert!(is_martingale(&pi, DEFAULT_TOL_MART));
        assert!(DiscreteCoupling::from_json_str(r#"{"points":[[0,1,0.5]]}"#).is_err());
    }
}
