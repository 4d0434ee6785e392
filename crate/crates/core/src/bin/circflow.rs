//! Command-line driver. Exit status: 0 pass, 1 threshold failure,
//! 2 usage or configuration error, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use circflow::experiments::{convergence, equivalence_check, run_evolve_from, steady_check, sweep};
use circflow::io::{load_config, write_atomic, RunConfig, RunMode};
use circflow::mms::COMPONENTS;
use circflow::{Error, Result};

#[derive(Parser)]
#[command(name = "circflow", version, about = "Perturbations of viscous circulatory flow around a cylinder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration
    #[arg(long, conflicts_with = "demo")]
    config: Option<PathBuf>,
    /// use the built-in defaults instead of a configuration file
    #[arg(long)]
    demo: bool,
    /// worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    /// output directory (overrides outputs.dir)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Residual of the steady background on a refinement ladder
    SteadyCheck(Common),
    /// Evolve one perturbation and write its diagnostics
    Evolve {
        #[command(flatten)]
        common: Common,
        /// continue from a snapshot written by an earlier run
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Repeat the evolve run over several amplitudes
    Sweep {
        #[command(flatten)]
        common: Common,
        /// amplitudes, comma separated (overrides sweep.epsilons)
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Manufactured-solution convergence study
    Convergence(Common),
    /// Primitive versus perturbation form on a refinement ladder
    Residual(Common),
}

fn load(common: &Common, mode: RunMode) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match (&common.config, common.demo) {
        (Some(path), _) => load_config(path)?,
        (None, true) => RunConfig::default(),
        (None, false) => return Err(Error::Usage("pass --config <path> or --demo".into())),
    };
    cfg.mode = mode;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.outputs.dir.clone());
    cfg.outputs.dir = out.clone();
    Ok((cfg, out))
}

fn verdict(pass: bool) -> bool {
    println!("{}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    write_atomic(&out.join(name), text.as_bytes())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SteadyCheck(common) => {
            let (cfg, out) = load(&common, RunMode::SteadyCheck)?;
            let c = &cfg.checks;
            let report = steady_check(&cfg.params, &cfg.grid, &c.ladder, c.min_order, c.exact_tol)?;
            println!("{:>6} {:>14} {:>14} {:>14}", "grid", "continuity", "r-momentum", "theta-momentum");
            for r in &report.rows {
                println!("{:>6} {:>14.4e} {:>14.4e} {:>14.4e}", r.n, r.continuity, r.r_momentum, r.theta_momentum);
            }
            println!("r-momentum order {:.3} (>= {}), exact residuals <= {:.1e} (<= {:.0e})", report.r_order, c.min_order, report.max_exact, c.exact_tol);
            write(&out, "steady_check.csv", &report.to_csv())?;
            Ok(verdict(report.pass))
        }
        Command::Evolve { common, resume } => {
            let (cfg, out) = load(&common, RunMode::Evolve)?;
            let (_, s) = run_evolve_from(&cfg, resume.as_deref(), Some(&out))?;
            println!("steps {}  t {}  (samples every {} steps)", s.steps, s.t, s.cadence);
            println!("N(T) {:.6e}  max N {:.6e}", s.n_final, s.max_n);
            match s.theorem_ratio {
                Some(r) => println!("bound constant {r:.6}"),
                None => println!("bound constant: undefined (zero initial data)"),
            }
            println!("boundary monitor {:.3e} (limit {:.3e})", s.max_monitor, s.contamination_limit);
            println!("wrote {}", out.display());
            Ok(verdict(!s.contaminated))
        }
        Command::Sweep { common, eps } => {
            let (mut cfg, out) = load(&common, RunMode::Sweep)?;
            if let Some(e) = eps {
                cfg.sweep.epsilons = e;
            }
            cfg.validate()?;
            let r = sweep(&cfg, Some(&out))?;
            println!("{:>10} {:>14} {:>12} {:>12} {:>12} {:>12}", "eps", "N(T)/eps^2", "bound C", "A1/N^1.5", "A2/N^1.5", "A3/N^1.5");
            for run in &r.runs {
                let a = run.a_ratios().unwrap_or([f64::NAN; 3]);
                println!(
                    "{:>10.1e} {:>14.6e} {:>12.6} {:>12.4e} {:>12.4e} {:>12.4e}",
                    run.amplitude,
                    run.n_final / (run.amplitude * run.amplitude),
                    run.theorem_ratio.unwrap_or(f64::NAN),
                    a[0],
                    a[1],
                    a[2]
                );
            }
            let s = &cfg.sweep;
            println!("N/eps^2 spread {:.4} (<= {})", r.n_spread, s.n_spread);
            println!("bound constant factor {:.4} (<= {})", r.ratio_factor, s.ratio_factor);
            println!("A-ratio factors {:.4?} (<= {})", r.a_factors, s.a_factor);
            println!("contaminated: {}", r.contaminated);
            Ok(verdict(r.pass))
        }
        Command::Convergence(common) => {
            let (cfg, out) = load(&common, RunMode::Convergence)?;
            let (study, pass) = convergence(&cfg, Some(&out))?;
            for run in &study.runs {
                println!("{:>6} {:?}", run.n, run.errors);
            }
            for (c, name) in COMPONENTS.iter().enumerate() {
                println!("{name:>8} slope {:.3}", study.slopes[c]);
            }
            println!("monotone: {}  (min slope {})", study.monotone, cfg.convergence.min_slope);
            Ok(verdict(pass))
        }
        Command::Residual(common) => {
            let (cfg, out) = load(&common, RunMode::Residual)?;
            let c = &cfg.checks;
            let r = equivalence_check(&cfg.params, &cfg.grid, &c.ladder, &c.perturbation, c.min_order)?;
            for (n, v) in r.grids.iter().zip(&r.values) {
                println!("{n:>6} {v:>14.4e}");
            }
            println!("order {:.3} (>= {})", r.order, c.min_order);
            write(&out, "residual.csv", &r.to_csv("residual"))?;
            Ok(verdict(r.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
