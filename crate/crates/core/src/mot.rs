//! Martingale optimal transport: the MOT value by LP, Strassen feasibility,
//! the dispersion-penalized reformulation, the kernel-lifted extension
//! `C(kappa, mu, nu)`, and competitor searches behind the monotonicity
//! principles.

use std::fmt;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus};
use crate::measures::{convex_order, locate, DiscreteCoupling, DiscreteMeasure};
use crate::polytope::{vertices, DEFAULT_BASIS_BUDGET};
use crate::transport::{ot_lp, TransportPlan};

/// Default margin for calling a competitor an improvement.
pub const DEFAULT_IMPROVE_TOL: f64 = 1e-7;

/// Cost matrix with explicit row (`x1`) and column (`x2`) locations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostMatrix {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// A two-argument cost `c(x1, x2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CostSpec {
    /// `|x2 - x1|`
    Abs,
    /// `(x2 - x1)^2`
    Square,
    /// `(x2 - k)^+`
    Call(f64),
    /// `sum c * x1^i * x2^j` over `(i, j, c)`
    Poly(Vec<(i32, i32, f64)>),
    Matrix(CostMatrix),
}

impl CostSpec {
    /// Parses `abs`, `square`, `call:K` or `poly:i,j,c;i,j,c;...`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Parse(format!("cost '{s}': {why}"));
        let num = |t: &str| t.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        match s.trim() {
            "abs" => Ok(Self::Abs),
            "square" => Ok(Self::Square),
            other => {
                if let Some(k) = other.strip_prefix("call:") {
                    return num(k).map(Self::Call).ok_or_else(|| bad("strike is not a finite number"));
                }
                if let Some(body) = other.strip_prefix("poly:") {
                    let mut terms = Vec::new();
                    for term in body.split(';').filter(|t| !t.trim().is_empty()) {
                        let parts: Vec<&str> = term.split(',').collect();
                        let [i, j, c] = parts[..] else {
                            return Err(bad("each term must be i,j,c"));
                        };
                        let exp = |t: &str| t.trim().parse::<i32>().ok().filter(|&e| (0..=16).contains(&e));
                        match (exp(i), exp(j), num(c)) {
                            (Some(i), Some(j), Some(c)) => terms.push((i, j, c)),
                            _ => return Err(bad("exponents must be 0..=16 and coefficients finite")),
                        }
                    }
                    if terms.is_empty() {
                        return Err(bad("no terms"));
                    }
                    return Ok(Self::Poly(terms));
                }
                Err(bad("expected abs, square, call:K or poly:i,j,c;..."))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Abs => "abs".into(),
            Self::Square => "square".into(),
            Self::Call(k) => format!("call:{k}"),
            Self::Poly(t) => format!(
                "poly:{}",
                t.iter().map(|(i, j, c)| format!("{i},{j},{c}")).collect::<Vec<_>>().join(";")
            ),
            Self::Matrix(_) => "matrix".into(),
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> Result<f64> {
        Ok(match self {
            Self::Abs => (x2 - x1).abs(),
            Self::Square => (x2 - x1) * (x2 - x1),
            Self::Call(k) => (x2 - k).max(0.0),
            Self::Poly(t) => t.iter().map(|&(i, j, c)| c * x1.powi(i) * x2.powi(j)).sum(),
            Self::Matrix(m) => match (locate(&m.x1, x1), locate(&m.x2, x2)) {
                (Some(i), Some(j)) => m.values[i][j],
                _ => return Err(invalid(format!("cost matrix has no entry for ({x1}, {x2})"))),
            },
        })
    }

    pub fn matrix(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<Vec<f64>>> {
        xs.iter()
            .map(|&x| ys.iter().map(|&y| self.eval(x, y)).collect())
            .collect()
    }
}

/// LP over `pi_ij >= 0` with the marginal equalities. The last column
/// constraint is left out since it is implied by the others.
fn coupling_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, extra_vars: usize) -> LinearProgram {
    let (m, n) = (mu.len(), nu.len());
    let nv = m * n + extra_vars;
    let mut lp = LinearProgram::new(nv);
    for (i, &w) in mu.weights().iter().enumerate() {
        let mut row = vec![0.0; nv];
        row[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(row, w);
    }
    for (j, &w) in nu.weights().iter().enumerate().take(n - 1) {
        let mut row = vec![0.0; nv];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        lp.add_eq(row, w);
    }
    lp
}

/// `sum_j (y_j - x_i) pi_ij` as a row over the coupling variables.
fn deviation_row(mu: &DiscreteMeasure, nu: &DiscreteMeasure, i: usize, nv: usize) -> Vec<f64> {
    let n = nu.len();
    let mut row = vec![0.0; nv];
    for (j, &y) in nu.atoms().iter().enumerate() {
        row[i * n + j] = y - mu.atoms()[i];
    }
    row
}

fn martingale_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> LinearProgram {
    let mut lp = coupling_lp(mu, nu, 0);
    let nv = lp.num_vars();
    for i in 0..mu.len() {
        lp.add_eq(deviation_row(mu, nu, i, nv), 0.0);
    }
    lp
}

fn grid_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure, values: &[f64]) -> Result<DiscreteCoupling> {
    let n = nu.len();
    let grid: Vec<Vec<f64>> = (0..mu.len()).map(|i| values[i * n..(i + 1) * n].to_vec()).collect();
    DiscreteCoupling::from_grid(mu.atoms(), nu.atoms(), &grid)
}

fn expect_optimal(sol: &LpSolution, what: &str) -> Result<()> {
    match sol.status {
        LpStatus::Optimal => Ok(()),
        LpStatus::Infeasible => Err(Error::ConvexOrder(format!("{what}: no feasible coupling"))),
        LpStatus::Unbounded => Err(Error::Lp(format!("{what}: unbounded"))),
    }
}

/// `C(mu, nu) = inf over martingale couplings of int c dpi`, with an optimal
/// coupling.
pub fn mot_solve(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostSpec) -> Result<(f64, DiscreteCoupling)> {
    let mut lp = martingale_lp(mu, nu);
    lp.objective = cost.matrix(mu.atoms(), nu.atoms())?.concat();
    let sol = solve_lp(&lp)?;
    expect_optimal(&sol, "MOT")?;
    Ok((sol.objective, grid_coupling(mu, nu, &sol.values)?))
}

/// Whether the martingale couplings of `(mu, nu)` form a nonempty set, by LP.
pub fn strassen_feasible(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    solve_lp(&martingale_lp(mu, nu)).is_ok_and(|s| s.is_optimal())
}

/// Transport over all couplings satisfying the barycentre dispersion
/// inequalities, with the absolute barycentre deviation charged at rate `L`.
/// For an `L`-Lipschitz cost this equals [`mot_solve`]'s value.
pub fn penalized_ot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostSpec, lipschitz: f64) -> Result<f64> {
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(invalid("Lipschitz constant must be finite and nonnegative"));
    }
    let (m, n) = (mu.len(), nu.len());
    let mut lp = coupling_lp(mu, nu, m);
    let nv = lp.num_vars();
    let c = cost.matrix(mu.atoms(), nu.atoms())?.concat();
    lp.objective[..m * n].copy_from_slice(&c);
    lp.objective[m * n..].iter_mut().for_each(|v| *v = lipschitz);
    let devs: Vec<Vec<f64>> = (0..m).map(|i| deviation_row(mu, nu, i, nv)).collect();
    // upper tails sum_{i >= k} dev_i >= 0
    for k in 0..m {
        let mut row = vec![0.0; nv];
        for d in &devs[k..] {
            row.iter_mut().zip(d).for_each(|(r, v)| *r += v);
        }
        lp.add_ge(row, 0.0);
    }
    // t_i >= |dev_i|
    for (i, d) in devs.iter().enumerate() {
        let mut up: Vec<f64> = d.iter().map(|v| -v).collect();
        up[m * n + i] = 1.0;
        lp.add_ge(up, 0.0);
        let mut down = d.clone();
        down[m * n + i] = 1.0;
        lp.add_ge(down, 0.0);
    }
    let sol = solve_lp(&lp)?;
    expect_optimal(&sol, "penalized transport")?;
    Ok(sol.objective)
}

/// Three-argument cost `c_hat(x1, x2, y2)` of the kernel-lifted problem,
/// where `x2` lives on `kappa_{x1}` and `y2` on `pi_{x1}`.
#[derive(Clone)]
pub enum KappaCost {
    /// `c(x1, y2)`: ignores the kernel, recovering the plain MOT cost.
    Lifted(CostSpec),
    /// `|x2 - y2|^p`
    KernelDistance(f64),
    Custom(Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for KappaCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Lifted(c) => f.debug_tuple("Lifted").field(c).finish(),
            Self::KernelDistance(p) => f.debug_tuple("KernelDistance").field(p).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl KappaCost {
    pub fn eval(&self, x1: f64, x2: f64, y2: f64) -> Result<f64> {
        match self {
            Self::Lifted(c) => c.eval(x1, y2),
            Self::KernelDistance(p) => Ok((x2 - y2).abs().powf(*p)),
            Self::Custom(f) => Ok(f(x1, x2, y2)),
        }
    }
}

/// A kernel `x1 -> kappa_{x1}` together with the lifted cost.
#[derive(Debug, Clone)]
pub struct KappaSpec {
    pub x1: Vec<f64>,
    pub kernel: Vec<DiscreteMeasure>,
    pub cost: KappaCost,
}

impl KappaSpec {
    pub fn new(x1: Vec<f64>, kernel: Vec<DiscreteMeasure>, cost: KappaCost) -> Result<Self> {
        if x1.len() != kernel.len() {
            return Err(invalid("kernel locations and laws differ in count"));
        }
        let mut pairs: Vec<(f64, DiscreteMeasure)> = x1.into_iter().zip(kernel).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[1].0 - w[0].0 <= crate::measures::ATOM_MERGE_TOL) {
            return Err(invalid("kernel defined twice at the same location"));
        }
        let (x1, kernel) = pairs.into_iter().unzip();
        Ok(Self { x1, kernel, cost })
    }

    /// The disintegration of `pi` as a kernel.
    pub fn from_coupling(pi: &DiscreteCoupling, cost: KappaCost) -> Self {
        Self {
            x1: pi.first_marginal().atoms().to_vec(),
            kernel: pi.kernel().to_vec(),
            cost,
        }
    }

    pub fn kernel_at(&self, x1: f64) -> Result<&DiscreteMeasure> {
        locate(&self.x1, x1)
            .map(|i| &self.kernel[i])
            .ok_or_else(|| invalid(format!("kernel is not defined at x1 = {x1}")))
    }

    fn inner_cost(&self, x1: f64, k: &DiscreteMeasure, ys: &[f64]) -> Result<Vec<Vec<f64>>> {
        k.atoms()
            .iter()
            .map(|&x2| ys.iter().map(|&y2| self.cost.eval(x1, x2, y2)).collect())
            .collect()
    }
}

/// `sum mu(x1) * OT(kappa_{x1}, pi_{x1}; c_hat(x1, ., .))` and the optimal
/// inner plans, aligned with the first marginal of `pi`.
pub fn kappa_inner_plans(pi: &DiscreteCoupling, kappa: &KappaSpec) -> Result<(f64, Vec<TransportPlan>)> {
    let mu = pi.first_marginal();
    let mut total = 0.0;
    let mut plans = Vec::with_capacity(mu.len());
    for (i, (x1, w)) in mu.iter().enumerate() {
        let k = kappa.kernel_at(x1)?;
        let target = &pi.kernel()[i];
        let cost = kappa.inner_cost(x1, k, target.atoms())?;
        let (value, mass) = ot_lp(k.weights(), target.weights(), &cost)?;
        total += w * value;
        plans.push(TransportPlan {
            source: k.atoms().to_vec(),
            target: target.atoms().to_vec(),
            mass,
        });
    }
    Ok((total, plans))
}

pub fn kappa_objective(pi: &DiscreteCoupling, kappa: &KappaSpec) -> Result<f64> {
    kappa_inner_plans(pi, kappa).map(|(v, _)| v)
}

pub const KAPPA_MAX_MU: usize = 4;
pub const KAPPA_MAX_NU: usize = 5;

/// Minimizes [`kappa_objective`] over the martingale couplings of
/// `(mu, nu)`. The objective is concave in the coupling, so its minimum sits
/// at a vertex of the martingale polytope; all vertices are scanned.
pub fn kappa_solve_bruteforce(
    kappa: &KappaSpec,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(f64, DiscreteCoupling)> {
    if mu.len() > KAPPA_MAX_MU || nu.len() > KAPPA_MAX_NU {
        return Err(Error::SizeGuard(format!(
            "supports of size {} and {}, at most {KAPPA_MAX_MU} and {KAPPA_MAX_NU} supported",
            mu.len(),
            nu.len()
        )));
    }
    if !convex_order(mu, nu) {
        return Err(Error::ConvexOrder("kernel-lifted problem needs convex order".into()));
    }
    let lp = martingale_lp(mu, nu);
    let mut best: Option<(f64, DiscreteCoupling)> = None;
    for v in vertices(&lp.eq_rows, &lp.eq_rhs, DEFAULT_BASIS_BUDGET)? {
        let pi = grid_coupling(mu, nu, &v)?;
        let value = kappa_objective(&pi, kappa)?;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, pi));
        }
    }
    best.ok_or_else(|| Error::ConvexOrder("martingale polytope has no vertices".into()))
}

fn grid_of(alpha: &DiscreteCoupling) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let g = alpha.to_grid();
    (g.x1, g.x2, g.mass)
}

/// Searches the competitors of `alpha` (same marginals, same conditional
/// barycentres, supported on `supp(alpha^1) x supp(alpha^2)`) for one with
/// cost below `int c dalpha - tol`.
pub fn competitor_improve(alpha: &DiscreteCoupling, cost: &CostSpec, tol: f64) -> Result<Option<DiscreteCoupling>> {
    let (xs, ys, mass) = grid_of(alpha);
    let (m, n) = (xs.len(), ys.len());
    let c = cost.matrix(&xs, &ys)?;
    let current: f64 = (0..m).map(|i| (0..n).map(|j| mass[i][j] * c[i][j]).sum::<f64>()).sum();
    let mu = alpha.first_marginal();
    let nu = alpha.second_marginal();
    let mut lp = coupling_lp(mu, nu, 0);
    lp.objective = c.concat();
    for i in 0..m {
        let mut row = vec![0.0; m * n];
        let mut bary = 0.0;
        for (j, &y) in ys.iter().enumerate() {
            row[i * n + j] = y;
            bary += y * mass[i][j];
        }
        lp.add_eq(row, bary);
    }
    let sol = solve_lp(&lp)?;
    expect_optimal(&sol, "competitor search")?;
    if sol.objective < current - tol {
        Ok(Some(grid_coupling(mu, nu, &sol.values)?))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub sample: usize,
    /// The sampled support points `(x1, x2)`.
    pub subset: Vec<(f64, f64)>,
    pub current: f64,
    pub improved: f64,
    #[serde(skip)]
    pub competitor: DiscreteCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub subset_size: usize,
    pub seed: u64,
    pub violations: Vec<Violation>,
}

/// Samples `samples` sub-supports of at most `subset_size` points, restricts
/// and renormalizes `pi` on each, and runs [`competitor_improve`]. Evidence
/// for optimality, not a proof.
pub fn monotonicity_check(
    pi: &DiscreteCoupling,
    cost: &CostSpec,
    samples: usize,
    subset_size: usize,
    seed: u64,
    tol: f64,
) -> Result<MonotonicityReport> {
    if subset_size == 0 {
        return Err(invalid("subset size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = pi.points();
    let k = subset_size.min(pts.len());
    let mut violations = Vec::new();
    for s in 0..samples {
        let mut idx = sample(&mut rng, pts.len(), k).into_vec();
        idx.sort_unstable();
        let alpha = DiscreteCoupling::new(idx.iter().map(|&i| pts[i]))?;
        if let Some(better) = competitor_improve(&alpha, cost, tol)? {
            let current = alpha.integrate(|a, b| cost.eval(a, b).unwrap_or(f64::NAN));
            let improved = better.integrate(|a, b| cost.eval(a, b).unwrap_or(f64::NAN));
            violations.push(Violation {
                sample: s,
                subset: idx.iter().map(|&i| (pts[i].0, pts[i].1)).collect(),
                current,
                improved,
                competitor: better,
            });
        }
    }
    Ok(MonotonicityReport {
        samples,
        subset_size,
        seed,
        violations,
    })
}

/// Competitor search for a pair `(alpha, gammas)` given `kappa`: the
/// competitor `alpha'` and its inner plans are optimized jointly as one LP in
/// `rho_{x1}(x2, y2)`, whose row sums are `alpha^1(x1) kappa_{x1}` and whose
/// slices sum to `alpha'`.
pub fn kappa_competitor_improve(
    alpha: &DiscreteCoupling,
    gammas: &[TransportPlan],
    kappa: &KappaSpec,
    tol: f64,
) -> Result<Option<(DiscreteCoupling, Vec<TransportPlan>)>> {
    let mu = alpha.first_marginal();
    let nu = alpha.second_marginal();
    let (xs, ys, mass) = grid_of(alpha);
    let ny = ys.len();
    if gammas.len() != xs.len() {
        return Err(invalid("one inner plan per first-coordinate atom is required"));
    }
    let mut current = 0.0;
    let mut kernels = Vec::with_capacity(xs.len());
    for (i, &x1) in xs.iter().enumerate() {
        let k = kappa.kernel_at(x1)?;
        let g = &gammas[i];
        let target = &alpha.kernel()[i];
        if g.source != k.atoms() || g.target != target.atoms() || !g.couples(k.weights(), target.weights(), 1e-9) {
            return Err(invalid(format!("inner plan at x1 = {x1} does not couple kappa and alpha")));
        }
        let c = kappa.inner_cost(x1, k, target.atoms())?;
        current += mu.weights()[i] * g.entries().map(|(a, b, m)| m * c[a][b]).sum::<f64>();
        kernels.push(k);
    }

    let mut offsets = Vec::with_capacity(xs.len());
    let mut nv = 0;
    for k in &kernels {
        offsets.push(nv);
        nv += k.len() * ny;
    }
    let mut lp = LinearProgram::new(nv);
    for (i, k) in kernels.iter().enumerate() {
        let c = kappa.inner_cost(xs[i], k, &ys)?;
        for (a, (&kw, crow)) in k.weights().iter().zip(&c).enumerate() {
            let base = offsets[i] + a * ny;
            lp.objective[base..base + ny].copy_from_slice(crow);
            let mut row = vec![0.0; nv];
            row[base..base + ny].iter_mut().for_each(|v| *v = 1.0);
            lp.add_eq(row, mu.weights()[i] * kw);
        }
    }
    for (j, &w) in nu.weights().iter().enumerate().take(ny - 1) {
        let mut row = vec![0.0; nv];
        for (i, k) in kernels.iter().enumerate() {
            for a in 0..k.len() {
                row[offsets[i] + a * ny + j] = 1.0;
            }
        }
        lp.add_eq(row, w);
    }
    for (i, k) in kernels.iter().enumerate() {
        let mut row = vec![0.0; nv];
        for a in 0..k.len() {
            for (j, &y) in ys.iter().enumerate() {
                row[offsets[i] + a * ny + j] = y;
            }
        }
        let bary: f64 = ys.iter().zip(&mass[i]).map(|(y, m)| y * m).sum();
        lp.add_eq(row, bary);
    }
    let sol = solve_lp(&lp)?;
    expect_optimal(&sol, "kernel competitor search")?;
    if sol.objective >= current - tol {
        return Ok(None);
    }
    let mut grid = vec![vec![0.0; ny]; xs.len()];
    for (i, k) in kernels.iter().enumerate() {
        for a in 0..k.len() {
            for j in 0..ny {
                grid[i][j] += sol.values[offsets[i] + a * ny + j];
            }
        }
    }
    let competitor = DiscreteCoupling::from_grid(&xs, &ys, &grid)?;
    let plans = kernels
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let w = mu.weights()[i];
            let cols: Vec<usize> = (0..ny).filter(|&j| grid[i][j] > 0.0).collect();
            TransportPlan {
                source: k.atoms().to_vec(),
                target: cols.iter().map(|&j| ys[j]).collect(),
                mass: (0..k.len())
                    .map(|a| cols.iter().map(|&j| sol.values[offsets[i] + a * ny + j] / w).collect())
                    .collect(),
            }
        })
        .collect();
    Ok(Some((competitor, plans)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::is_martingale;

    fn m(a: &[f64], w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(a, w).unwrap()
    }

    fn pm1() -> DiscreteMeasure {
        m(&[-1.0, 1.0], &[0.5, 0.5])
    }

    #[test]
    fn parse_costs() {
        assert_eq!(CostSpec::parse("abs").unwrap(), CostSpec::Abs);
        assert_eq!(CostSpec::parse("call:1.5").unwrap(), CostSpec::Call(1.5));
        assert_eq!(
            CostSpec::parse("poly:0,2,1;1,1,-2").unwrap(),
            CostSpec::Poly(vec![(0, 2, 1.0), (1, 1, -2.0)])
        );
        assert!(CostSpec::parse("poly:1,2").is_err());
        assert!(CostSpec::parse("call:nan").is_err());
        assert!(CostSpec::parse("cubic").is_err());
    }

    #[test]
    fn mot_examples() {
        let (v, pi) = mot_solve(&DiscreteMeasure::dirac(0.0), &pm1(), &CostSpec::Abs).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(pi, DiscreteCoupling::product(&DiscreteMeasure::dirac(0.0), &pm1()));

        let mu = m(&[0.0, 1.0, 3.0], &[0.2, 0.3, 0.5]);
        let (v, pi) = mot_solve(&mu, &mu, &CostSpec::Call(0.5)).unwrap();
        let diag: f64 = mu.iter().map(|(x, w)| w * (x - 0.5f64).max(0.0)).sum();
        assert!((v - diag).abs() < 1e-12);
        assert!(is_martingale(&pi, 1e-9));

        let nu = m(&[-2.0, 0.0, 2.0, 5.0], &[0.25, 0.25, 0.25, 0.25]);
        let mu = m(&[0.5, 2.0], &[0.5, 0.5]);
        assert!(convex_order(&mu, &nu));
        let (v, _) = mot_solve(&mu, &nu, &CostSpec::Square).unwrap();
        assert!((v - (nu.moment(2) - mu.moment(2))).abs() < 1e-9);
    }

    #[test]
    fn mot_rejects_unordered() {
        assert!(matches!(
            mot_solve(&pm1(), &DiscreteMeasure::dirac(0.0), &CostSpec::Abs),
            Err(Error::ConvexOrder(_))
        ));
    }

    #[test]
    fn strassen_examples() {
        assert!(strassen_feasible(&DiscreteMeasure::dirac(0.0), &pm1()));
        assert!(!strassen_feasible(&pm1(), &DiscreteMeasure::dirac(0.0)));
    }

    #[test]
    fn penalized_examples() {
        let v = penalized_ot(&DiscreteMeasure::dirac(0.0), &pm1(), &CostSpec::Abs, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let mu = m(&[0.0, 2.0, 3.0], &[0.3, 0.3, 0.4]);
        assert!(penalized_ot(&mu, &mu, &CostSpec::Abs, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kappa_examples() {
        let pi = DiscreteCoupling::new([(0.0, -1.0, 0.25), (0.0, 1.0, 0.25), (1.0, 0.0, 0.2), (1.0, 3.0, 0.3)]).unwrap();
        let lifted = KappaSpec::from_coupling(&pi, KappaCost::Lifted(CostSpec::Square));
        let direct = pi.integrate(|a, b| (b - a) * (b - a));
        assert!((kappa_objective(&pi, &lifted).unwrap() - direct).abs() < 1e-12);

        let own = KappaSpec::from_coupling(&pi, KappaCost::KernelDistance(1.0));
        assert!(kappa_objective(&pi, &own).unwrap().abs() < 1e-12);

        let missing = KappaSpec::new(vec![0.0], vec![DiscreteMeasure::dirac(0.0)], KappaCost::KernelDistance(1.0)).unwrap();
        assert!(kappa_objective(&pi, &missing).is_err());
    }

    #[test]
    fn kappa_bruteforce_singleton_and_guard() {
        let nu = m(&[-1.0, 0.5, 2.0], &[0.3, 0.4, 0.3]);
        let mu = DiscreteMeasure::dirac(nu.mean());
        let pi0 = DiscreteCoupling::product(&mu, &nu);
        let spec = KappaSpec::new(vec![mu.atoms()[0]], vec![m(&[0.0], &[1.0])], KappaCost::KernelDistance(1.0)).unwrap();
        let (v, pi) = kappa_solve_bruteforce(&spec, &mu, &nu).unwrap();
        assert_eq!(pi, pi0);
        assert!((v - kappa_objective(&pi0, &spec).unwrap()).abs() < 1e-12);

        let big = m(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[1.0; 6]);
        assert!(matches!(kappa_solve_bruteforce(&spec, &big, &big), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn competitor_examples() {
        let alpha = DiscreteCoupling::new([(0.0, -1.0, 0.2), (0.0, 1.0, 0.3), (1.0, 0.0, 0.1), (1.0, 2.0, 0.4)]).unwrap();
        assert!(competitor_improve(&alpha, &CostSpec::Square, 1e-7).unwrap().is_none());
        let one = DiscreteCoupling::new([(0.0, 1.0, 1.0)]).unwrap();
        assert!(competitor_improve(&one, &CostSpec::Abs, 1e-7).unwrap().is_none());
    }

    #[test]
    fn suboptimal_coupling_has_a_competitor() {
        let pi = DiscreteCoupling::new([(-1.0, -3.0, 0.25), (-1.0, 1.0, 0.25), (1.0, -1.0, 0.25), (1.0, 3.0, 0.25)]).unwrap();
        assert!(is_martingale(&pi, 1e-12));
        let better = competitor_improve(&pi, &CostSpec::Abs, 1e-7).unwrap().unwrap();
        assert!((pi.integrate(|a, b| (b - a).abs()) - 2.0).abs() < 1e-12);
        // the hand-built competitor with rows (1/8, 1/4, 1/8, 0) and (1/8, 0, 1/8, 1/4) costs 3/2
        assert!(better.integrate(|a, b| (b - a).abs()) <= 1.5 + 1e-9);
        let report = monotonicity_check(&pi, &CostSpec::Abs, 5, 4, 1, 1e-7).unwrap();
        assert_eq!(report.violations.len(), 5);
    }

    #[test]
    fn kappa_competitor_reduces_to_plain_search() {
        let pi = DiscreteCoupling::new([(-1.0, -3.0, 0.25), (-1.0, 1.0, 0.25), (1.0, -1.0, 0.25), (1.0, 3.0, 0.25)]).unwrap();
        let spec = KappaSpec::from_coupling(&pi, KappaCost::Lifted(CostSpec::Abs));
        let (_, plans) = kappa_inner_plans(&pi, &spec).unwrap();
        let (alpha2, plans2) = kappa_competitor_improve(&pi, &plans, &spec, 1e-7).unwrap().unwrap();
        let plain = competitor_improve(&pi, &CostSpec::Abs, 1e-7).unwrap().unwrap();
        let cost = |c: &DiscreteCoupling| c.integrate(|a, b| (b - a).abs());
        assert!((cost(&alpha2) - cost(&plain)).abs() < 1e-9);
        assert_eq!(plans2.len(), 2);

        let own = KappaSpec::from_coupling(&pi, KappaCost::KernelDistance(1.0));
        let (_, plans) = kappa_inner_plans(&pi, &own).unwrap();
        assert!(kappa_competitor_improve(&pi, &plans, &own, 1e-7).unwrap().is_none());
    }
}
