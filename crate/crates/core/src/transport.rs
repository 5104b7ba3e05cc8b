//! Classical optimal transport: closed-form Wasserstein distances on the line,
//! the OT linear program, and marginal adaptation of a coupling.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::measures::{quantile_segments, DiscreteCoupling, DiscreteMeasure};

/// A transport plan between two finitely supported measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub mass: Vec<Vec<f64>>,
}

impl TransportPlan {
    pub fn zeros(source: &[f64], target: &[f64]) -> Self {
        Self {
            source: source.to_vec(),
            target: target.to_vec(),
            mass: vec![vec![0.0; target.len()]; source.len()],
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.target.len())
            .map(|j| self.mass.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Nonzero cells as `(i, j, mass)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.mass.iter().enumerate().flat_map(|(i, r)| {
            r.iter()
                .enumerate()
                .filter(|(_, &m)| m > 0.0)
                .map(move |(j, &m)| (i, j, m))
        })
    }

    /// `sum mass_ij * f(source_i, target_j)`.
    pub fn cost(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.entries()
            .map(|(i, j, m)| m * f(self.source[i], self.target[j]))
            .sum()
    }

    /// Whether the plan couples the two weight vectors within `tol`.
    pub fn couples(&self, a: &[f64], b: &[f64], tol: f64) -> bool {
        let close = |x: &[f64], y: &[f64]| x.len() == y.len() && x.iter().zip(y).all(|(u, v)| (u - v).abs() <= tol);
        close(&self.row_sums(), a) && close(&self.col_sums(), b)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("p must be a finite number >= 1, got {p}")))
    }
}

/// The monotone (quantile) plan, optimal for every convex cost of `x - y`.
pub fn optimal_coupling_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> TransportPlan {
    let mut plan = TransportPlan::zeros(mu.atoms(), nu.atoms());
    for (i, j, m) in quantile_segments(mu, nu) {
        plan.mass[i][j] += m;
    }
    plan
}

/// `W_p(mu, nu)^p` from the quantile pairing.
pub fn w_pp_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_p(p)?;
    let (a, b) = (mu.atoms(), nu.atoms());
    Ok(quantile_segments(mu, nu)
        .into_iter()
        .map(|(i, j, m)| m * (a[i] - b[j]).abs().powf(p))
        .sum())
}

pub fn w_p_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    Ok(w_pp_1d(mu, nu, p)?.powf(1.0 / p))
}

/// Solves the transport LP between weight vectors `a` and `b` with the given
/// cost matrix. Returns the optimal value and plan masses.
pub fn ot_lp(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 || cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(invalid("cost matrix does not match the marginals"));
    }
    let mut lp = LinearProgram::new(m * n);
    for i in 0..m {
        for j in 0..n {
            lp.objective[i * n + j] = cost[i][j];
        }
    }
    for (i, &ai) in a.iter().enumerate() {
        let mut row = vec![0.0; m * n];
        row[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(row, ai);
    }
    // the last column constraint is implied by the others
    for (j, &bj) in b.iter().enumerate().take(n - 1) {
        let mut row = vec![0.0; m * n];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        lp.add_eq(row, bj);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("transport problem reported {:?}", sol.status)));
    }
    let plan = (0..m).map(|i| sol.values[i * n..(i + 1) * n].to_vec()).collect();
    Ok((sol.objective, plan))
}

/// OT between two measures on the line with cost `f(x, y)`.
pub fn ot_measures(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    f: impl Fn(f64, f64) -> f64,
) -> Result<(f64, TransportPlan)> {
    let cost: Vec<Vec<f64>> = mu
        .atoms()
        .iter()
        .map(|&x| nu.atoms().iter().map(|&y| f(x, y)).collect())
        .collect();
    let (value, mass) = ot_lp(mu.weights(), nu.weights(), &cost)?;
    Ok((
        value,
        TransportPlan {
            source: mu.atoms().to_vec(),
            target: nu.atoms().to_vec(),
            mass,
        },
    ))
}

/// Wasserstein distance between two planar measures with ground cost
/// `|x1 - y1|^p + |x2 - y2|^p`.
pub fn w_p_plane(pi: &DiscreteCoupling, rho: &DiscreteCoupling, p: f64) -> Result<f64> {
    check_p(p)?;
    let cost: Vec<Vec<f64>> = pi
        .points()
        .iter()
        .map(|&(x1, x2, _)| {
            rho.points()
                .iter()
                .map(|&(y1, y2, _)| (x1 - y1).abs().powf(p) + (x2 - y2).abs().powf(p))
                .collect()
        })
        .collect();
    let a: Vec<f64> = pi.points().iter().map(|q| q.2).collect();
    let b: Vec<f64> = rho.points().iter().map(|q| q.2).collect();
    let (value, _) = ot_lp(&a, &b, &cost)?;
    Ok(value.max(0.0).powf(1.0 / p))
}

/// Output of [`adapt_marginals`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    /// The adapted coupling with the requested marginals.
    pub coupling: DiscreteCoupling,
    /// `(int |x1 - y1|^p + |x2 - y2|^p drho)^(1/p)` for the constructed plan
    /// `rho`, an upper bound on `W_p(pi, coupling)`.
    pub plan_cost: f64,
    /// `W_p(mu, mu2) + W_p(nu, nu2)`.
    pub bound: f64,
}

/// Moves a coupling onto new marginals: each first coordinate is pushed along
/// the monotone plan from `mu` to `mu2` and each second coordinate along the
/// monotone plan from `nu` to `nu2`, independently given `(x1, x2)`.
pub fn adapt_marginals(
    pi: &DiscreteCoupling,
    mu2: &DiscreteMeasure,
    nu2: &DiscreteMeasure,
    p: f64,
) -> Result<Adaptation> {
    check_p(p)?;
    let (mu, nu) = (pi.first_marginal(), pi.second_marginal());
    let zeta = optimal_coupling_1d(mu, mu2);
    let eta = optimal_coupling_1d(nu, nu2);
    let rows = |plan: &TransportPlan, from: &DiscreteMeasure| -> Vec<Vec<(f64, f64)>> {
        plan.mass
            .iter()
            .zip(from.weights())
            .map(|(r, &w)| {
                r.iter()
                    .zip(&plan.target)
                    .filter(|(&m, _)| m > 0.0)
                    .map(|(&m, &y)| (y, m / w))
                    .collect()
            })
            .collect()
    };
    let zeta_rows = rows(&zeta, mu);
    let eta_rows = rows(&eta, nu);

    let mut points = Vec::new();
    let mut moved = 0.0;
    for &(x1, x2, w) in pi.points() {
        let i = mu.index_of(x1).expect("first marginal atom");
        let j = nu.index_of(x2).expect("second marginal atom");
        for &(y1, a) in &zeta_rows[i] {
            for &(y2, b) in &eta_rows[j] {
                let m = w * a * b;
                points.push((y1, y2, m));
                moved += m * ((x1 - y1).abs().powf(p) + (x2 - y2).abs().powf(p));
            }
        }
    }
    Ok(Adaptation {
        coupling: DiscreteCoupling::new(points)?,
        plan_cost: moved.powf(1.0 / p),
        bound: w_p_1d(mu, mu2, p)? + w_p_1d(nu, nu2, p)?,
    })
}
