//! The weighted L^2 energy identity of the linearized system: its discrete
//! residual under refinement, then the dissipation integral along a run.

use circflow::experiments::balance_check;
use circflow::{Bump, FlowParams, GridSpec, Problem, RhsMode, StepControl};
use circflow::dynamics::make_bump_ic;

fn main() -> circflow::Result<()> {
    let p = FlowParams::default();
    let bump = Bump { amplitude: 1e-2, ..Bump::default() };
    let check = balance_check(&p, &GridSpec::default(), &[64, 128, 256], &bump, 1.9)?;
    print!("{}", check.to_csv("residual"));
    println!("order {:.3}", check.order);

    let problem = Problem::new(GridSpec::default().with_size(64, 64), &p, RhsMode::Linearized)?;
    let run = problem.evolve(&make_bump_ic(&problem.grid, &bump)?, &StepControl { t_end: 1.0, ..StepControl::default() }, &mut ())?;
    for s in &run.series.samples {
        println!("t {:>7.4}  energy {:.6e}  int dissipation {:.6e}", s.t, s.report.e_l2, s.integrals.d_l2);
    }
    Ok(())
}
