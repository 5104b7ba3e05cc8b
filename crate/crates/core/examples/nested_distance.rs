//! Nested Wasserstein distance between two couplings next to the plain
//! distance on the plane, which it dominates.

use martingale_ot::measures::DiscreteCoupling;
use martingale_ot::nested::nested_w_p;
use martingale_ot::transport::w_p_plane;
use martingale_ot::Result;

fn main() -> Result<()> {
    // close in the plane, but pi reveals the second step at time one and
    // rho does not
    let pi = DiscreteCoupling::new([(-0.1, -1.0, 0.5), (0.1, 1.0, 0.5)])?;
    let rho = DiscreteCoupling::new([(0.0, -1.0, 0.5), (0.0, 1.0, 0.5)])?;
    for p in [1.0, 2.0] {
        let (nd, plan) = nested_w_p(&pi, &rho, p)?;
        plan.verify(&pi, &rho, 1e-9)?;
        println!("p = {p}: plane {:.6}  nested {nd:.6}", w_p_plane(&pi, &rho, p)?);
    }
    Ok(())
}
