//! One stability run with the default parameters on a reduced grid,
//! printing the energy functional as it is sampled.

use circflow::diagnostics::{n_functional, theorem_ratio};
use circflow::dynamics::make_bump_ic;
use circflow::{Bump, FlowParams, GridSpec, Problem, RhsMode, StepControl};

fn main() -> circflow::Result<()> {
    let problem = Problem::new(GridSpec::default().with_size(64, 64), &FlowParams::default(), RhsMode::Full)?;
    let initial = make_bump_ic(&problem.grid, &Bump::default())?;
    let control = StepControl { t_end: 2.0, diag_every: 20, ..StepControl::default() };
    let run = problem.evolve(&initial, &control, &mut ())?;

    let n = n_functional(&run.series);
    println!("{:>6} {:>8} {:>12} {:>12} {:>12}", "step", "t", "N(t)", "phi H2", "v H3");
    for (s, n) in run.series.samples.iter().zip(&n) {
        println!("{:>6} {:>8.4} {:>12.4e} {:>12.4e} {:>12.4e}", s.step, s.t, n, s.report.phi_h2, s.report.v_h3);
    }
    println!("{} steps, bound constant {:.4}", run.steps, theorem_ratio(&run.series).unwrap_or(f64::NAN));
    Ok(())
}
