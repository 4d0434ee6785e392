//! Amplitude sweep on a reduced grid and horizon: `N(T) / eps^2` and the
//! bound constant should not depend on eps.

use circflow::experiments::sweep;
use circflow::io::RunConfig;

fn main() -> circflow::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.grid = cfg.grid.with_size(64, 64);
    cfg.control.t_end = 1.0;
    let out = std::env::temp_dir().join("circflow_sweep");
    let report = sweep(&cfg, Some(&out))?;
    print!("{}", report.to_csv());
    println!("spread {:.4}, bound factor {:.4}, A factors {:.3?}", report.n_spread, report.ratio_factor, report.a_factors);
    println!("pass {}  (outputs in {})", report.pass, out.display());
    Ok(())
}
