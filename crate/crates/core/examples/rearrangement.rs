//! Step-by-step rearrangement of a random coupling, then the bicausal plan
//! assembled from the trace.

use martingale_ot::lab::{random_convex_pair, random_coupling};
use martingale_ot::measures::DEFAULT_TOL_MART;
use martingale_ot::nested::project_to_martingale;
use martingale_ot::rearrange::{trace_to_bicausal_plan, Rearranger, Step};
use martingale_ot::Result;

fn main() -> Result<()> {
    let (mu, nu) = random_convex_pair(7, 4, 8, 5.0)?;
    let pi = random_coupling(7, &mu, &nu)?;
    let mut r = Rearranger::new(&pi, DEFAULT_TOL_MART)?;
    println!("start: eps {:.9}", r.report().epsilon);
    while let Some(step) = r.step()? {
        match step {
            Step::Switch { record, epsilon_after } => println!(
                "switch  ({}, {}) <-> ({}, {}) lambda {:.6}  eps {epsilon_after:.9}",
                record.x1_minus, record.x2_minus, record.x1_plus, record.x2_plus, record.lambda
            ),
            Step::Cascade { cascade, epsilon_after } => println!(
                "cascade m = {} a = {:.6} over {} links  eps {epsilon_after:.9}",
                cascade.tuples.m,
                cascade.a,
                cascade.links.len()
            ),
        }
    }
    let res = r.finish()?;
    let plan = trace_to_bicausal_plan(&pi, &res)?;
    plan.verify(&pi, &res.output, 1e-9)?;
    println!(
        "bound {:.9}  plan cost {:.9}  projection {:.9}  ratio {:.3}",
        res.cost_bound,
        plan.cost,
        project_to_martingale(&pi)?.value,
        res.ratio().unwrap_or(1.0)
    );
    Ok(())
}
