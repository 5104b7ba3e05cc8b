//! The comonotone coupling of a convex-ordered pair satisfies barycentre
//! dispersion, so single switches alone reach a martingale at cost epsilon.

use martingale_ot::lab::random_convex_pair;
use martingale_ot::measures::{barycentre_report, check_dispersion, hoeffding_frechet, DEFAULT_TOL_MART};
use martingale_ot::nested::project_to_martingale;
use martingale_ot::rearrange::rearrange;
use martingale_ot::Result;

fn main() -> Result<()> {
    for seed in 0..5 {
        let (mu, nu) = random_convex_pair(seed, 3, 7, 4.0)?;
        let hf = hoeffding_frechet(&mu, &nu);
        let eps = barycentre_report(&hf, DEFAULT_TOL_MART).epsilon;
        let proj = project_to_martingale(&hf)?.value;
        let r = rearrange(&hf, DEFAULT_TOL_MART)?;
        println!(
            "seed {seed}: dispersion {} eps {eps:.9} projection {proj:.9} bound {:.9} ({} switches, {} cascades)",
            check_dispersion(&hf, 1e-12),
            r.cost_bound,
            r.steps() - r.cascades().count(),
            r.cascades().count()
        );
    }
    Ok(())
}
