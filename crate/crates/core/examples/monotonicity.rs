//! Sampled competitor search: silent on an optimal coupling, flags a
//! suboptimal one.

use martingale_ot::lab::random_convex_pair;
use martingale_ot::measures::DiscreteCoupling;
use martingale_ot::mot::{monotonicity_check, mot_solve, CostSpec, DEFAULT_IMPROVE_TOL};
use martingale_ot::Result;

fn main() -> Result<()> {
    let (mu, nu) = random_convex_pair(5, 3, 7, 3.0)?;
    let (_, opt) = mot_solve(&mu, &nu, &CostSpec::Abs)?;
    let rep = monotonicity_check(&opt, &CostSpec::Abs, 100, 4, 5, DEFAULT_IMPROVE_TOL)?;
    println!("optimal coupling: {} of {} samples improvable", rep.violations.len(), rep.samples);

    let bad = DiscreteCoupling::new([(-1.0, -3.0, 0.25), (-1.0, 1.0, 0.25), (1.0, -1.0, 0.25), (1.0, 3.0, 0.25)])?;
    let rep = monotonicity_check(&bad, &CostSpec::Abs, 1, 4, 0, DEFAULT_IMPROVE_TOL)?;
    for v in &rep.violations {
        println!("suboptimal coupling: cost {:.6} -> {:.6}", v.current, v.improved);
        for &(x, y, w) in v.competitor.points() {
            println!("  ({x:>4}, {y:>4}) {w:.6}");
        }
    }
    Ok(())
}
