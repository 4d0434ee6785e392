//! Manufactured-solution convergence study on a 32/64/128 ladder, plus the
//! unforced ablation run on the coarse grid.

use circflow::mms::{convergence_study, run_case, ForcingKind, ManufacturedCase, COMPONENTS};

fn main() -> circflow::Result<()> {
    let case = ManufacturedCase::default();
    let (t_end, cfl) = (0.5, 0.4);
    let t0 = std::time::Instant::now();
    let study = convergence_study(&case, &[32, 64, 128], t_end, cfl, ForcingKind::Analytic)?;
    print!("{}", study.to_csv());
    for (c, name) in COMPONENTS.iter().enumerate() {
        println!("{name:>8}: slope {:.3}", study.slopes[c]);
    }
    println!("monotone: {}  ({:.1?})", study.monotone, t0.elapsed());
    println!("steps: {:?}", study.runs.iter().map(|r| r.steps).collect::<Vec<_>>());

    let free = run_case(&case, 32, t_end, cfl, None)?;
    let forced = &study.runs[0];
    let ratio = (0..4).map(|c| free.errors[c] / forced.errors[c]).fold(f64::INFINITY, f64::min);
    println!("unforced / forced error at n=32: at least {ratio:.1}x");
    Ok(())
}
