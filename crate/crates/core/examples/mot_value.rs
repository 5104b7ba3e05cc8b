//! MOT values for a few costs, the quadratic identity, and the
//! dispersion-penalized reformulation.

use martingale_ot::measures::DiscreteMeasure;
use martingale_ot::mot::{mot_solve, penalized_ot, strassen_feasible, CostSpec};
use martingale_ot::Result;

fn main() -> Result<()> {
    let mu = DiscreteMeasure::new(&[-1.0, 0.0, 1.0], &[0.25, 0.5, 0.25])?;
    let nu = DiscreteMeasure::new(&[-3.0, -1.0, 0.0, 1.0, 3.0], &[0.1, 0.2, 0.4, 0.2, 0.1])?;
    println!("feasible: {}", strassen_feasible(&mu, &nu));
    for spec in ["abs", "square", "call:0.5", "poly:1,2,1"] {
        let cost = CostSpec::parse(spec)?;
        let (value, plan) = mot_solve(&mu, &nu, &cost)?;
        println!("{spec:>12}: value {value:.9} on {} support points", plan.len());
    }
    println!("second moment gap: {:.9}", nu.moment(2) - mu.moment(2));
    let (value, _) = mot_solve(&mu, &nu, &CostSpec::Abs)?;
    println!("penalized (L = 1): {:.9} vs {value:.9}", penalized_ot(&mu, &nu, &CostSpec::Abs, 1.0)?);
    Ok(())
}
