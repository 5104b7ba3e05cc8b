//! Instance generators, the two counterexample families, and the continuity
//! and stability sweeps.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`, so every
//! generator is a pure function of its arguments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measures::{barycentre_report, convex_order, north_west, DiscreteCoupling, DiscreteMeasure};
use crate::mot::{mot_solve, CostSpec};
use crate::nested::project_to_martingale;
use crate::transport::{adapt_marginals, w_p_1d};

/// Atoms drawn by the random generators sit on this grid.
pub const ATOM_GRID: f64 = 1.0 / 64.0;
/// Attempts at a convex-order-preserving perturbation before a row fails.
pub const PERTURB_RETRIES: usize = 20;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A counterexample coupling with its known epsilon and projection value.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub family: u8,
    pub n: usize,
    pub coupling: DiscreteCoupling,
    pub expected_epsilon: f64,
    pub expected_projection: f64,
}

/// `k` equally weighted atoms at `scale * (offset + i)`: the end rows keep half
/// their mass in place and push half one step inward-outward, interior rows
/// split evenly between both neighbours.
fn chain_coupling(k: usize, offset: i64, scale: f64) -> DiscreteCoupling {
    let h = 0.5 / k as f64;
    let at = |i: i64| scale * (offset + i) as f64;
    let last = k as i64 - 1;
    let mut pts = vec![(at(0), at(0), h), (at(0), at(1), h)];
    for i in 1..last {
        pts.push((at(i), at(i - 1), h));
        pts.push((at(i), at(i + 1), h));
    }
    pts.push((at(last), at(last - 1), h));
    pts.push((at(last), at(last), h));
    DiscreteCoupling::new(pts).expect("chain coupling is well formed")
}

/// `mu = nu` uniform on `{1, ..., n}` with rows `1 -> {1, 2}`, `n -> {n-1, n}`
/// and `i -> {i-1, i+1}` in between.
pub fn example1_family1(n: usize) -> Result<Example> {
    if n < 2 {
        return Err(invalid("family 1 needs n >= 2"));
    }
    let nf = n as f64;
    Ok(Example {
        family: 1,
        n,
        coupling: chain_coupling(n, 1, 1.0),
        expected_epsilon: 1.0 / nf,
        expected_projection: (nf - 1.0) / nf,
    })
}

/// `mu = nu` uniform on `{-n^2, -n(n-1), ..., n^2}` with the same row pattern
/// as family 1.
pub fn example1_family2(n: usize) -> Result<Example> {
    if n < 1 {
        return Err(invalid("family 2 needs n >= 1"));
    }
    let nf = n as f64;
    Ok(Example {
        family: 2,
        n,
        coupling: chain_coupling(2 * n + 1, -(n as i64), nf),
        expected_epsilon: nf / (2.0 * nf + 1.0),
        expected_projection: 2.0 * nf * nf / (2.0 * nf + 1.0),
    })
}

/// A measure with `k` atoms on the grid in `[-radius, radius]` and weights
/// drawn from `[0.1, 1)` before normalization. Atoms that collide merge.
pub fn random_measure(rng: &mut ChaCha8Rng, k: usize, radius: f64) -> Result<DiscreteMeasure> {
    if k == 0 || !(radius > 0.0) {
        return Err(invalid("random measure needs k >= 1 and a positive radius"));
    }
    let atoms: Vec<f64> = (0..k)
        .map(|_| (rng.gen_range(-radius..=radius) / ATOM_GRID).round() * ATOM_GRID)
        .collect();
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    DiscreteMeasure::new(&atoms, &weights)
}

/// Law of the conditional mean of `nu` given the block of its atom:
/// `assignment[j]` is the block of atom `j`.
pub fn block_means(nu: &DiscreteMeasure, assignment: &[usize]) -> Result<DiscreteMeasure> {
    if assignment.len() != nu.len() {
        return Err(invalid("one block index per atom is required"));
    }
    let blocks = assignment.iter().max().map_or(0, |b| b + 1);
    let mut mass = vec![0.0; blocks];
    let mut first = vec![0.0; blocks];
    for ((x, w), &b) in nu.iter().zip(assignment) {
        mass[b] += w;
        first[b] += w * x;
    }
    let (atoms, weights): (Vec<f64>, Vec<f64>) = mass
        .iter()
        .zip(&first)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &f)| (f / m, m))
        .unzip();
    DiscreteMeasure::new(&atoms, &weights)
}

/// `(mu, nu)` with `mu` in convex order below `nu`: `nu` has up to `k` atoms
/// in `[-radius, radius]` and `mu` is the law of its conditional mean over a
/// random partition of the atoms into `m` nonempty blocks.
pub fn random_convex_pair(seed: u64, m: usize, k: usize, radius: f64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if m == 0 || m > k {
        return Err(invalid(format!("need 1 <= m <= k, got m = {m}, k = {k}")));
    }
    let mut r = rng(seed);
    let nu = random_measure(&mut r, k, radius)?;
    let m = m.min(nu.len());
    let mut order: Vec<usize> = (0..nu.len()).collect();
    order.shuffle(&mut r);
    let mut assignment = vec![0; nu.len()];
    for (pos, &j) in order.iter().enumerate() {
        assignment[j] = if pos < m { pos } else { r.gen_range(0..m) };
    }
    Ok((block_means(&nu, &assignment)?, nu))
}

/// A coupling of `(mu, nu)`: a random mixture of one to three north-west
/// corner couplings taken under random orderings of both supports.
pub fn random_coupling(seed: u64, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscreteCoupling> {
    let mut r = rng(seed);
    let parts = r.gen_range(1..=3);
    let mix: Vec<f64> = (0..parts).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = mix.iter().sum();
    let mut pts = Vec::new();
    for t in mix {
        let mut pa: Vec<usize> = (0..mu.len()).collect();
        let mut pb: Vec<usize> = (0..nu.len()).collect();
        pa.shuffle(&mut r);
        pb.shuffle(&mut r);
        let a: Vec<f64> = pa.iter().map(|&i| mu.weights()[i]).collect();
        let b: Vec<f64> = pb.iter().map(|&j| nu.weights()[j]).collect();
        for (i, j, w) in north_west(&a, &b) {
            pts.push((mu.atoms()[pa[i]], nu.atoms()[pb[j]], w * t / total));
        }
    }
    DiscreteCoupling::new(pts)
}

/// Parameterized instance families.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum InstanceFamily {
    Example1Family1 { n: usize },
    Example1Family2 { n: usize },
    RandomConvexPair { seed: u64, m: usize, k: usize, radius: f64 },
    /// A random coupling of a random convex pair.
    RandomCoupling { seed: u64, m: usize, k: usize, radius: f64 },
}

impl InstanceFamily {
    /// The family's coupling; for a bare pair, its comonotone coupling.
    pub fn coupling(&self) -> Result<DiscreteCoupling> {
        match *self {
            Self::Example1Family1 { n } => Ok(example1_family1(n)?.coupling),
            Self::Example1Family2 { n } => Ok(example1_family2(n)?.coupling),
            Self::RandomConvexPair { seed, m, k, radius } => {
                let (mu, nu) = random_convex_pair(seed, m, k, radius)?;
                Ok(crate::measures::hoeffding_frechet(&mu, &nu))
            }
            Self::RandomCoupling { seed, m, k, radius } => {
                let (mu, nu) = random_convex_pair(seed, m, k, radius)?;
                random_coupling(seed.wrapping_add(1), &mu, &nu)
            }
        }
    }
}

/// Pushes the atoms of `nu` away from its mean along `dirs` (one entry in
/// `[0, 1]` per atom), scaled so the mean is kept and the largest shift is
/// exactly `h`.
pub fn spread(nu: &DiscreteMeasure, dirs: &[f64], h: f64) -> Result<DiscreteMeasure> {
    if dirs.len() != nu.len() {
        return Err(invalid("one direction per atom is required"));
    }
    let mean = nu.mean();
    let (mut up, mut down, mut up_max, mut down_max) = (0.0, 0.0, 0.0f64, 0.0f64);
    for ((x, w), &u) in nu.iter().zip(dirs) {
        if x > mean {
            up += w * u;
            up_max = up_max.max(u);
        } else if x < mean {
            down += w * u;
            down_max = down_max.max(u);
        }
    }
    if h == 0.0 || up <= 0.0 || down <= 0.0 {
        return Ok(nu.clone());
    }
    let kappa = 1.0 / (up_max / up).max(down_max / down);
    let atoms: Vec<f64> = nu
        .iter()
        .zip(dirs)
        .map(|((x, _), &u)| {
            if x > mean {
                x + h * u * kappa / up
            } else if x < mean {
                x - h * u * kappa / down
            } else {
                x
            }
        })
        .collect();
    DiscreteMeasure::new(&atoms, nu.weights())
}

/// Outward perturbation of `nu` at scale `h` that keeps `mu` below it in
/// convex order, retrying with fresh directions. Directions for attempt
/// `t` come from `seed + t`, so the same attempt uses the same directions at
/// every scale.
fn perturb(mu: &DiscreteMeasure, nu: &DiscreteMeasure, h: f64, seed: u64) -> Result<DiscreteMeasure> {
    for t in 0..PERTURB_RETRIES as u64 {
        let mut r = rng(seed.wrapping_add(t));
        let dirs: Vec<f64> = (0..nu.len()).map(|_| r.gen_range(0.0..=1.0)).collect();
        let nu_h = spread(nu, &dirs, h)?;
        if convex_order(mu, &nu_h) {
            return Ok(nu_h);
        }
    }
    Err(Error::ConvexOrder(format!(
        "no order-preserving perturbation at h = {h} after {PERTURB_RETRIES} attempts"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub w_mu: f64,
    pub w_nu: f64,
    pub value: f64,
    pub delta: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub cost: String,
    pub p: f64,
    pub seed: u64,
    pub base_value: f64,
    /// Sorted by `h`, largest first.
    pub rows: Vec<SweepRow>,
    /// `|delta|` weakly decreases down the rows, up to `1e-9` per step.
    pub monotone: bool,
}

/// MOT values on perturbed second marginals: `mu` is kept, `nu` is spread
/// outward by at most `h` per atom, and `|C(mu, nu_h) - C(mu, nu)|` is
/// reported for every scale.
pub fn continuity_sweep(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    p: f64,
    scales: &[f64],
    seed: u64,
) -> Result<SweepResult> {
    if !convex_order(mu, nu) {
        return Err(Error::ConvexOrder("sweep needs marginals in convex order".into()));
    }
    if scales.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
        return Err(invalid("scales must be finite and nonnegative"));
    }
    let (base_value, _) = mot_solve(mu, nu, cost)?;
    let mut hs = scales.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(hs.len());
    for h in hs {
        let row = match perturb(mu, nu, h, seed).and_then(|nu_h| {
            let (value, _) = mot_solve(mu, &nu_h, cost)?;
            Ok((w_p_1d(nu, &nu_h, p)?, value))
        }) {
            Ok((w_nu, value)) => SweepRow {
                h,
                w_mu: 0.0,
                w_nu,
                value,
                delta: (value - base_value).abs(),
                error: None,
            },
            Err(e) => SweepRow {
                h,
                w_mu: 0.0,
                w_nu: f64::NAN,
                value: f64::NAN,
                delta: f64::NAN,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    let monotone = rows.windows(2).all(|w| w[1].delta <= w[0].delta + 1e-9);
    Ok(SweepResult {
        cost: cost.name(),
        p,
        seed,
        base_value,
        rows,
        monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub h: f64,
    pub w_nu: f64,
    pub epsilon: f64,
    pub projection: f64,
    /// `epsilon <= projection + 1e-9`
    pub sandwich: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityResult {
    pub seed: u64,
    pub base_epsilon: f64,
    pub base_projection: f64,
    /// Sorted by `h`, largest first.
    pub rows: Vec<StabilityRow>,
}

/// Moves `pi` onto outward-perturbed second marginals with
/// [`adapt_marginals`] and recomputes epsilon and the projection value.
pub fn projection_stability(pi: &DiscreteCoupling, scales: &[f64], seed: u64) -> Result<StabilityResult> {
    let (mu, nu) = (pi.first_marginal(), pi.second_marginal());
    if !convex_order(mu, nu) {
        return Err(Error::ConvexOrder("stability sweep needs marginals in convex order".into()));
    }
    let base = project_to_martingale(pi)?;
    let mut hs = scales.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(hs.len());
    for h in hs {
        let attempt = perturb(mu, nu, h, seed).and_then(|nu_h| {
            let adapted = adapt_marginals(pi, mu, &nu_h, 1.0)?.coupling;
            let epsilon = barycentre_report(&adapted, crate::measures::DEFAULT_TOL_MART).epsilon;
            let projection = project_to_martingale(&adapted)?.value;
            Ok((w_p_1d(nu, &nu_h, 1.0)?, epsilon, projection))
        });
        rows.push(match attempt {
            Ok((w_nu, epsilon, projection)) => StabilityRow {
                h,
                w_nu,
                epsilon,
                projection,
                sandwich: epsilon <= projection + 1e-9,
                error: None,
            },
            Err(e) => StabilityRow {
                h,
                w_nu: f64::NAN,
                epsilon: f64::NAN,
                projection: f64::NAN,
                sandwich: false,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(StabilityResult {
        seed,
        base_epsilon: base.lower_bound,
        base_projection: base.value,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::is_martingale;

    #[test]
    fn family_values() {
        let e = example1_family1(4).unwrap();
        assert_eq!(e.coupling.first_marginal().atoms(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.coupling.second_marginal(), e.coupling.first_marginal());
        assert!((barycentre_report(&e.coupling, 1e-9).epsilon - 0.25).abs() < 1e-12);
        assert!(example1_family1(1).is_err());

        let e = example1_family2(2).unwrap();
        assert_eq!(e.coupling.first_marginal().atoms(), &[-4.0, -2.0, 0.0, 2.0, 4.0]);
        assert!((barycentre_report(&e.coupling, 1e-9).epsilon - 0.4).abs() < 1e-12);
        assert!((e.expected_projection - 1.6).abs() < 1e-15);
        assert!(example1_family2(0).is_err());
    }

    #[test]
    fn block_partitions() {
        let nu = DiscreteMeasure::new(&[-1.0, 0.5, 2.0], &[0.2, 0.5, 0.3]).unwrap();
        let one = block_means(&nu, &[0, 0, 0]).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one.atoms()[0] - nu.mean()).abs() < 1e-15);
        assert_eq!(block_means(&nu, &[0, 1, 2]).unwrap(), nu);
    }

    #[test]
    fn generators_are_deterministic_and_ordered() {
        let (mu, nu) = random_convex_pair(42, 3, 6, 5.0).unwrap();
        assert!(convex_order(&mu, &nu));
        assert_eq!(random_convex_pair(42, 3, 6, 5.0).unwrap(), (mu.clone(), nu.clone()));
        let pi = random_coupling(7, &mu, &nu).unwrap();
        assert_eq!(pi, random_coupling(7, &mu, &nu).unwrap());
        for (a, b) in pi.first_marginal().weights().iter().zip(mu.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(random_convex_pair(1, 4, 3, 1.0).is_err());
    }

    #[test]
    fn closed_form_sweep() {
        let mu = DiscreteMeasure::dirac(0.0);
        let nu = DiscreteMeasure::new(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        let r = continuity_sweep(&mu, &nu, &CostSpec::Abs, 1.0, &[0.001, 0.1, 0.01, 0.0], 3).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.h).collect::<Vec<_>>(), vec![0.1, 0.01, 0.001, 0.0]);
        for row in &r.rows {
            assert!((row.value - (1.0 + row.h)).abs() < 1e-12);
            assert!((row.delta - row.h).abs() < 1e-12);
        }
        assert!(r.monotone);
    }

    #[test]
    fn stability_of_family1() {
        let pi = example1_family1(5).unwrap().coupling;
        let r = projection_stability(&pi, &[1e-3], 5).unwrap();
        assert!(r.rows[0].error.is_none());
        assert!((r.rows[0].projection - 0.8).abs() < 0.05);
    }

    #[test]
    fn stability_on_a_martingale() {
        let pi = DiscreteCoupling::new([(0.0, -1.0, 0.25), (0.0, 1.0, 0.25), (2.0, 1.0, 0.25), (2.0, 3.0, 0.25)]).unwrap();
        assert!(is_martingale(&pi, 1e-12));
        let r = projection_stability(&pi, &[0.0, 0.05, 0.2], 11).unwrap();
        for row in &r.rows {
            assert!(row.epsilon <= 2.0 * row.h + 1e-9);
            assert!(row.sandwich);
        }
        let zero = r.rows.last().unwrap();
        assert_eq!((zero.epsilon, zero.projection), (r.base_epsilon, r.base_projection));
    }
}
