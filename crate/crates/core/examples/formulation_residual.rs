//! The perturbation form against the primitive form on the same grid:
//! their difference is truncation error and shrinks at second order.

use circflow::experiments::equivalence_check;
use circflow::{Bump, FlowParams, GridSpec};

fn main() -> circflow::Result<()> {
    let bump = Bump { amplitude: 1e-2, center: [11.0, 0.0], widths: [2.0, 2.0], ..Bump::default() };
    let check = equivalence_check(&FlowParams::default(), &GridSpec::default(), &[64, 128, 256], &bump, 1.9)?;
    print!("{}", check.to_csv("residual"));
    println!("order {:.3}, pass {}", check.order, check.pass);
    Ok(())
}
