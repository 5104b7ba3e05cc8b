//! MOT values and projection values under shrinking perturbations of the
//! second marginal.

use martingale_ot::lab::{continuity_sweep, example1_family1, projection_stability, random_convex_pair};
use martingale_ot::mot::CostSpec;
use martingale_ot::Result;

fn main() -> Result<()> {
    let (mu, nu) = random_convex_pair(3, 3, 6, 4.0)?;
    let sweep = continuity_sweep(&mu, &nu, &CostSpec::Abs, 1.0, &[0.1, 0.03, 0.01, 0.003, 0.001], 3)?;
    println!("C(mu, nu) = {:.9}", sweep.base_value);
    for row in &sweep.rows {
        println!("h {:<6} W1(nu, nu_h) {:.6}  C {:.9}  |dC| {:.2e}", row.h, row.w_nu, row.value, row.delta);
    }
    println!("monotone: {}", sweep.monotone);

    let pi = example1_family1(5)?.coupling;
    let st = projection_stability(&pi, &[0.1, 0.01, 0.001], 3)?;
    for row in &st.rows {
        println!("h {:<6} eps {:.6}  projection {:.6}", row.h, row.epsilon, row.projection);
    }
    Ok(())
}
