//! The two chain families: epsilon, projection value and the certified
//! rearrangement bound against their closed forms.

use martingale_ot::lab::{example1_family1, example1_family2, Example};
use martingale_ot::measures::{check_dispersion, DEFAULT_TOL_MART};
use martingale_ot::nested::{nd_lower_bound, project_to_martingale};
use martingale_ot::rearrange::rearrange;
use martingale_ot::Result;

fn row(ex: &Example) -> Result<()> {
    let eps = nd_lower_bound(&ex.coupling);
    let proj = project_to_martingale(&ex.coupling)?.value;
    let r = rearrange(&ex.coupling, DEFAULT_TOL_MART)?;
    println!(
        "{:>6} {:>3} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>6}",
        ex.family,
        ex.n,
        ex.expected_epsilon,
        eps,
        ex.expected_projection,
        proj,
        r.cost_bound,
        check_dispersion(&ex.coupling, 1e-12)
    );
    Ok(())
}

fn main() -> Result<()> {
    println!("family   n   eps exp   eps got  proj exp  proj got     bound  disp.");
    for n in 2..=8 {
        row(&example1_family1(n)?)?;
    }
    for n in 1..=5 {
        row(&example1_family2(n)?)?;
    }
    Ok(())
}
