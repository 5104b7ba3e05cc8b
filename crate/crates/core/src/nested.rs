//! Nested (bicausal) Wasserstein distances between two-period couplings and
//! the LP projection of a coupling onto the martingale couplings with the
//! same marginals.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::measures::{barycentre_report, convex_order, DiscreteCoupling, DEFAULT_TOL_MART};
use crate::transport::{optimal_coupling_1d, ot_lp, w_pp_1d, TransportPlan};

/// Inner plan between the kernels `pi_{x1}` and `rho_{y1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerPlan {
    pub x1: f64,
    pub y1: f64,
    pub plan: TransportPlan,
}

/// An outer plan on first coordinates plus, for every outer cell with
/// positive mass, a plan between the two conditional laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BicausalPlan {
    pub outer: TransportPlan,
    pub inner: Vec<InnerPlan>,
    pub p: f64,
    /// `sum outer(x1, y1) * (|x1 - y1|^p + inner cost)`; the distance is its
    /// `1/p`-th power.
    pub cost: f64,
}

impl BicausalPlan {
    /// Diagonal plan with the outer identity on the first marginal of `pi`.
    pub(crate) fn diagonal(pi: &DiscreteCoupling, inner: Vec<TransportPlan>, p: f64) -> Self {
        let mu = pi.first_marginal();
        let mut outer = TransportPlan::zeros(mu.atoms(), mu.atoms());
        for (i, &w) in mu.weights().iter().enumerate() {
            outer.mass[i][i] = w;
        }
        let inner: Vec<InnerPlan> = mu
            .atoms()
            .iter()
            .zip(inner)
            .map(|(&x1, plan)| InnerPlan { x1, y1: x1, plan })
            .collect();
        let cost = mu
            .weights()
            .iter()
            .zip(&inner)
            .map(|(w, ip)| w * ip.plan.cost(|a, b| (a - b).abs().powf(p)))
            .sum();
        Self { outer, inner, p, cost }
    }

    /// Checks the plan against the two couplings it claims to connect.
    pub fn verify(&self, pi: &DiscreteCoupling, rho: &DiscreteCoupling, tol: f64) -> Result<()> {
        let fail = |what: &str| Err(Error::Invariant(format!("bicausal plan: {what}")));
        let (mu, nu) = (pi.first_marginal(), rho.first_marginal());
        if self.outer.source != mu.atoms() || self.outer.target != nu.atoms() {
            return fail("outer supports differ from the first marginals");
        }
        if !self.outer.couples(mu.weights(), nu.weights(), tol) {
            return fail("outer plan does not couple the first marginals");
        }
        let mut total = 0.0;
        for (i, j, m) in self.outer.entries() {
            let (x1, y1) = (mu.atoms()[i], nu.atoms()[j]);
            let Some(ip) = self.inner.iter().find(|ip| ip.x1 == x1 && ip.y1 == y1) else {
                return fail("missing inner plan for a charged outer cell");
            };
            let (k1, k2) = (&pi.kernel()[i], &rho.kernel()[j]);
            let source_ok = ip.plan.source == k1.atoms();
            let target_ok = ip.plan.target == k2.atoms();
            if !source_ok || !target_ok || !ip.plan.couples(k1.weights(), k2.weights(), tol) {
                return fail("inner plan does not couple the kernels");
            }
            total += m * ((x1 - y1).abs().powf(self.p) + ip.plan.cost(|a, b| (a - b).abs().powf(self.p)));
        }
        if (total - self.cost).abs() > tol {
            return fail("recorded cost differs from the plan's cost");
        }
        Ok(())
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("p must be a finite number >= 1, got {p}")))
    }
}

/// Nested Wasserstein distance `W_p^nd(pi, rho)` and an optimal bicausal plan.
///
/// Inner values are closed-form quantile distances between kernels; the outer
/// problem is an OT LP on first coordinates with cost
/// `|x1 - y1|^p + W_p^p(pi_{x1}, rho_{y1})`.
pub fn nested_w_p(pi: &DiscreteCoupling, rho: &DiscreteCoupling, p: f64) -> Result<(f64, BicausalPlan)> {
    check_p(p)?;
    let (mu, nu) = (pi.first_marginal(), rho.first_marginal());
    let mut cost = vec![vec![0.0; nu.len()]; mu.len()];
    for (i, &x1) in mu.atoms().iter().enumerate() {
        for (j, &y1) in nu.atoms().iter().enumerate() {
            cost[i][j] = (x1 - y1).abs().powf(p) + w_pp_1d(&pi.kernel()[i], &rho.kernel()[j], p)?;
        }
    }
    let (value, mass) = ot_lp(mu.weights(), nu.weights(), &cost)?;
    let outer = TransportPlan {
        source: mu.atoms().to_vec(),
        target: nu.atoms().to_vec(),
        mass,
    };
    let inner = outer
        .entries()
        .map(|(i, j, _)| InnerPlan {
            x1: mu.atoms()[i],
            y1: nu.atoms()[j],
            plan: optimal_coupling_1d(&pi.kernel()[i], &rho.kernel()[j]),
        })
        .collect();
    let value = value.max(0.0);
    Ok((
        value.powf(1.0 / p),
        BicausalPlan {
            outer,
            inner,
            p,
            cost: value,
        },
    ))
}

/// `epsilon(pi)`: every martingale coupling with the marginals of `pi` is at
/// nested distance (p = 1) at least this far from `pi`.
pub fn nd_lower_bound(pi: &DiscreteCoupling) -> f64 {
    barycentre_report(pi, DEFAULT_TOL_MART).epsilon
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// Optimal value of the projection LP with identity outer plan: an upper
    /// value for the nested distance to the martingale couplings.
    pub value: f64,
    pub projected: DiscreteCoupling,
    pub plan: BicausalPlan,
    /// `epsilon(pi)`, never above `value`.
    pub lower_bound: f64,
}

/// Projects `pi` onto the martingale couplings with the same marginals in the
/// nested distance with p = 1, keeping the outer plan on the diagonal.
///
/// One LP in the inner plans `rho_{x1}(x2, y2)`: rows reproduce `pi`, columns
/// add up to the second marginal, and each `x1`-slice of the target has
/// barycentre `x1`.
pub fn project_to_martingale(pi: &DiscreteCoupling) -> Result<ProjectionResult> {
    let (mu, nu) = (pi.first_marginal(), pi.second_marginal());
    if !convex_order(mu, nu) {
        return Err(Error::ConvexOrder("projection needs marginals in convex order".into()));
    }
    let identity: Vec<usize> = (0..mu.len()).collect();
    let (value, slices) = projection_lp(pi, &identity)?;

    let y2 = nu.atoms();
    let grid: Vec<Vec<f64>> = slices
        .iter()
        .map(|slice| (0..y2.len()).map(|j| slice.iter().map(|r| r[j]).sum()).collect())
        .collect();
    let projected = DiscreteCoupling::from_grid(mu.atoms(), y2, &grid)?;

    let mut inner = Vec::with_capacity(mu.len());
    for (i, slice) in slices.iter().enumerate() {
        let w = mu.weights()[i];
        let source = pi.kernel()[i].atoms().to_vec();
        let cols: Vec<usize> = (0..y2.len()).filter(|&j| grid[i][j] > 0.0).collect();
        let target: Vec<f64> = cols.iter().map(|&j| y2[j]).collect();
        let mass = slice
            .iter()
            .map(|r| cols.iter().map(|&j| r[j] / w).collect())
            .collect();
        inner.push(TransportPlan { source, target, mass });
    }
    let plan = BicausalPlan::diagonal(pi, inner, 1.0);
    let lower_bound = nd_lower_bound(pi);
    Ok(ProjectionResult {
        value,
        projected,
        plan,
        lower_bound,
    })
}

/// Solves the projection LP where row `i` of `pi` is transported onto row
/// `sigma[i]` of the target. Returns the optimal value (including the outer
/// cost for a uniform first marginal) and `rho[i][k][j]`, the mass sent from
/// the `k`-th support point of `pi_{x_i}` to the `j`-th atom of the second
/// marginal.
fn projection_lp(pi: &DiscreteCoupling, sigma: &[usize]) -> Result<(f64, Vec<Vec<Vec<f64>>>)> {
    let (mu, nu) = (pi.first_marginal(), pi.second_marginal());
    let (x1, y2) = (mu.atoms(), nu.atoms());
    let ny = y2.len();
    // offsets[i] = first variable of row i
    let mut offsets = Vec::with_capacity(mu.len() + 1);
    let mut nvars = 0;
    for i in 0..mu.len() {
        offsets.push(nvars);
        nvars += pi.row(i).len() * ny;
    }
    let mut lp = LinearProgram::new(nvars);
    for i in 0..mu.len() {
        for (k, &(_, x2, w)) in pi.row(i).iter().enumerate() {
            let base = offsets[i] + k * ny;
            let mut row = vec![0.0; nvars];
            for (j, &y) in y2.iter().enumerate() {
                lp.objective[base + j] = (x2 - y).abs();
                row[base + j] = 1.0;
            }
            lp.add_eq(row, w);
        }
    }
    // the last column is implied by the row constraints
    for (j, &nw) in nu.weights().iter().enumerate().take(ny - 1) {
        let mut row = vec![0.0; nvars];
        for i in 0..mu.len() {
            for k in 0..pi.row(i).len() {
                row[offsets[i] + k * ny + j] = 1.0;
            }
        }
        lp.add_eq(row, nw);
    }
    // the slice fed by row i sits at first coordinate x1[sigma[i]]
    for i in 0..mu.len() {
        let target = x1[sigma[i]];
        let mut row = vec![0.0; nvars];
        for k in 0..pi.row(i).len() {
            for (j, &y) in y2.iter().enumerate() {
                row[offsets[i] + k * ny + j] = y - target;
            }
        }
        lp.add_eq(row, 0.0);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::ConvexOrder("no martingale coupling with these marginals".into()))
        }
        LpStatus::Unbounded => return Err(Error::Lp("projection LP reported unbounded".into())),
    }
    let slices = (0..mu.len())
        .map(|i| {
            (0..pi.row(i).len())
                .map(|k| sol.values[offsets[i] + k * ny..offsets[i] + (k + 1) * ny].to_vec())
                .collect()
        })
        .collect();
    let outer: f64 = (0..mu.len())
        .map(|i| mu.weights()[i] * (x1[i] - x1[sigma[i]]).abs())
        .sum();
    Ok((sol.objective + outer, slices))
}

/// Largest first marginal accepted by [`project_unrestricted_bruteforce`].
pub const BRUTEFORCE_MAX_ATOMS: usize = 5;

/// Projection value without the diagonal restriction, for a first marginal
/// with equal weights: the bicausal outer plan then ranges over the doubly
/// stochastic matrices, and for a fixed target the objective is linear in it,
/// so minimizing over outer permutations is exhaustive.
pub fn project_unrestricted_bruteforce(pi: &DiscreteCoupling) -> Result<f64> {
    let mu = pi.first_marginal();
    if mu.len() > BRUTEFORCE_MAX_ATOMS {
        return Err(Error::SizeGuard(format!(
            "{} first-coordinate atoms, at most {BRUTEFORCE_MAX_ATOMS} supported",
            mu.len()
        )));
    }
    let w0 = mu.weights()[0];
    if mu.weights().iter().any(|w| (w - w0).abs() > 1e-12) {
        return Err(invalid("brute-force projection needs a uniform first marginal"));
    }
    if !convex_order(mu, pi.second_marginal()) {
        return Err(Error::ConvexOrder("projection needs marginals in convex order".into()));
    }
    let mut best = f64::INFINITY;
    for sigma in (0..mu.len()).permutations(mu.len()) {
        let (value, _) = projection_lp(pi, &sigma)?;
        best = best.min(value);
    }
    Ok(best)
}
