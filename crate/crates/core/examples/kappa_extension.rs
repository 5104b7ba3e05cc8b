//! The kernel-lifted objective: with a cost that ignores the kernel it is
//! the plain integral, with a kernel distance it measures how far a
//! martingale coupling's kernels sit from a reference kernel.

use martingale_ot::lab::{random_convex_pair, random_coupling};
use martingale_ot::mot::{kappa_objective, kappa_solve_bruteforce, mot_solve, CostSpec, KappaCost, KappaSpec};
use martingale_ot::Result;

fn main() -> Result<()> {
    let (mu, nu) = random_convex_pair(2, 2, 4, 3.0)?;
    let reference = random_coupling(2, &mu, &nu)?;

    let lifted = KappaSpec::from_coupling(&reference, KappaCost::Lifted(CostSpec::Abs));
    let direct = reference.integrate(|x, y| (y - x).abs());
    println!("lifted objective {:.9} vs integral {direct:.9}", kappa_objective(&reference, &lifted)?);
    let (best, _) = kappa_solve_bruteforce(&lifted, &mu, &nu)?;
    println!("lifted minimum {best:.9} vs MOT value {:.9}", mot_solve(&mu, &nu, &CostSpec::Abs)?.0);

    let dist = KappaSpec::from_coupling(&reference, KappaCost::KernelDistance(1.0));
    let (value, pi) = kappa_solve_bruteforce(&dist, &mu, &nu)?;
    println!("closest martingale kernels: {value:.9}");
    for &(x, y, w) in pi.points() {
        println!("  ({x:.4}, {y:.4}) {w:.6}");
    }
    Ok(())
}
