//! Write snapshots during a run, then restart from the middle one and
//! compare the final states.

use circflow::experiments::{run_evolve, run_evolve_from};
use circflow::io::RunConfig;

fn main() -> circflow::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.grid = cfg.grid.with_size(48, 48);
    cfg.control.t_end = 2.0;
    cfg.outputs.snapshot_every = 10;
    let dir = std::env::temp_dir().join("circflow_resume");
    let (full, _) = run_evolve(&cfg, Some(&dir))?;

    let mid = dir.join("snapshot_00000010.bin");
    let (resumed, _) = run_evolve_from(&cfg, Some(&mid), None)?;
    println!("unbroken: {} steps, resumed: {} steps", full.steps, resumed.steps);
    println!("final states bitwise equal: {}", full.state.bits_eq(&resumed.state));
    Ok(())
}
