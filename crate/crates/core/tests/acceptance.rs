//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//! Run with `cargo test --release --test acceptance`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use circflow::background::{bar_rho, bar_rho_prime, bar_utheta};
use circflow::diagnostics::Sample;
use circflow::dynamics::make_bump_ic;
use circflow::experiments::{balance_check, equivalence_check, steady_check, sweep, SweepReport};
use circflow::io::{timeseries_csv, RunConfig};
use circflow::mms::convergence_study;
use circflow::{FlowParams, GridSpec, Problem, RhsMode, State, StepControl};

const ORDER: f64 = 1.9;
const EXACT: f64 = 1e-12;
const SLOPE: (f64, f64) = (2.0, 0.15);

struct Outcome {
    pass: bool,
    detail: String,
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool").install(f)
}

fn background_identities() -> circflow::Result<Outcome> {
    let sets = [
        FlowParams::default(),
        FlowParams { gamma: 2.0, ..FlowParams::default() },
        FlowParams { gamma: 3.0, ..FlowParams::default() },
        FlowParams::new(2.5, 1.4, 0.05, 0.1, 0.3, 2.0)?,
        FlowParams::new(0.7, 5.0 / 3.0, 1.0, -0.5, 2.0, 0.5)?,
    ];
    let mut worst = 0.0_f64;
    for p in &sets {
        for k in 0..10_000 {
            let r = 1.0 + 99.0 * k as f64 / 9_999.0;
            let (rho, drho, u) = (bar_rho(r, p)?, bar_rho_prime(r, p)?, bar_utheta(r, p)?);
            let force = p.a * p.gamma * rho.powf(p.gamma - 1.0) * drho;
            let centripetal = rho * u * u / r;
            worst = worst.max((force - centripetal).abs() / centripetal.abs());
            let c = r.powi(3) * drho * rho.powf(p.gamma - 2.0);
            worst = worst.max((c - p.swirl_constant()).abs() / p.swirl_constant());
        }
    }
    Ok(Outcome { pass: worst <= EXACT, detail: format!("max relative error {worst:.2e} (<= {EXACT:.0e})") })
}

/// 1000 steps from the zero state; returns the diagnostics CSV.
fn zero_run() -> circflow::Result<(bool, usize, String)> {
    let p = Problem::new(GridSpec::default(), &FlowParams::default(), RhsMode::Full)?;
    let control = StepControl { t_end: 1e9, max_steps: 1000, diag_every: 10, ..StepControl::default() };
    let run = p.evolve(&State::zeros(&p.grid), &control, &mut ())?;
    let zero = run.state.fields().iter().all(|f| f.data.iter().all(|x| x.to_bits() == 0));
    Ok((zero, run.steps, timeseries_csv(&run.series)))
}

fn steady_residual(cfg: &RunConfig) -> circflow::Result<Outcome> {
    let c = &cfg.checks;
    let r = steady_check(&cfg.params, &cfg.grid, &c.ladder, ORDER, EXACT)?;
    let pass = r.r_order >= ORDER && r.max_exact <= EXACT;
    Ok(Outcome { pass, detail: format!("r-momentum order {:.3} (>= {ORDER}), exact residuals {:.1e} (<= {EXACT:.0e})", r.r_order, r.max_exact) })
}

fn equivalence(cfg: &RunConfig) -> circflow::Result<Outcome> {
    let c = &cfg.checks;
    let r = equivalence_check(&cfg.params, &cfg.grid, &c.ladder, &c.perturbation, ORDER)?;
    Ok(Outcome { pass: r.pass, detail: format!("order {:.3} (>= {ORDER}), eps {}", r.order, c.perturbation.amplitude) })
}

fn mms(cfg: &RunConfig) -> circflow::Result<Outcome> {
    let c = &cfg.convergence;
    let s = convergence_study(&c.case, &c.ladder, c.t_end, c.cfl_safety, c.forcing)?;
    let pass = s.slopes.iter().all(|x| (x - SLOPE.0).abs() <= SLOPE.1);
    Ok(Outcome { pass, detail: format!("slopes {:.3?} (2.0 +- 0.15), ladder {:?}", s.slopes, c.ladder) })
}

fn read_sweep_csvs(dir: &Path, n: usize) -> Vec<u8> {
    let mut all = fs::read(dir.join("sweep.csv")).expect("sweep.csv");
    for k in 0..n {
        all.extend(fs::read(dir.join(format!("eps_{k}/timeseries.csv"))).expect("timeseries.csv"));
    }
    all
}

fn stability(r: &circflow::Result<SweepReport>, cfg: &RunConfig) -> [Outcome; 4] {
    let s = &cfg.sweep;
    match r {
        Err(e) => {
            let fail = || Outcome { pass: false, detail: format!("run failed: {e}") };
            [fail(), fail(), fail(), fail()]
        }
        Ok(r) => [
            Outcome {
                pass: !r.contaminated && r.runs.len() == s.epsilons.len(),
                detail: format!("{} runs to T = {}, max monitor {:.2e}, contaminated {}", r.runs.len(), cfg.control.t_end, r.runs.iter().map(|x| x.max_monitor).fold(0.0, f64::max), r.contaminated),
            },
            Outcome { pass: r.n_spread <= s.n_spread, detail: format!("N(T)/eps^2 spread {:.4} (<= {})", r.n_spread, s.n_spread) },
            Outcome { pass: r.ratio_factor <= s.ratio_factor, detail: format!("bound constant factor {:.4} (<= {})", r.ratio_factor, s.ratio_factor) },
            Outcome {
                pass: r.a_factors.iter().all(|f| *f <= s.a_factor),
                detail: format!("|int A_i| / N^1.5 factors {:.4?} (<= {})", r.a_factors, s.a_factor),
            },
        ],
    }
}

fn dissipation_monotone(samples: &[Sample]) -> bool {
    samples.windows(2).all(|w| {
        let (a, b) = (&w[0].integrals, &w[1].integrals);
        b.d_l2 >= a.d_l2
            && b.d_time >= a.d_time
            && b.d_tt >= a.d_tt
            && b.d_z[0] >= a.d_z[0]
            && b.d_z[1] >= a.d_z[1]
            && b.d_press >= a.d_press
    })
}

fn linear_balance(cfg: &RunConfig) -> circflow::Result<Outcome> {
    let c = &cfg.checks;
    let bump = cfg.checks.perturbation.with_amplitude(1e-2);
    let bump = circflow::Bump { center: [6.0, 0.0], widths: [1.0, 1.0], ..bump };
    let r = balance_check(&cfg.params, &cfg.grid, &c.ladder, &bump, ORDER)?;
    let p = Problem::new(cfg.grid.with_size(64, 64), &cfg.params, RhsMode::Linearized)?;
    let run = p.evolve(&make_bump_ic(&p.grid, &bump)?, &StepControl { t_end: 2.0, diag_every: 2, ..StepControl::default() }, &mut ())?;
    let mono = dissipation_monotone(&run.series.samples);
    Ok(Outcome { pass: r.pass && mono, detail: format!("balance order {:.3} (>= {ORDER}), dissipation integrals non-decreasing {mono}", r.order) })
}

fn report(id: &str, name: &str, secs: f64, o: &circflow::Result<Outcome>) -> bool {
    let (pass, detail) = match o {
        Ok(o) => (o.pass, o.detail.clone()),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("[{}] {id} {name}: {detail} ({secs:.1} s)", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    let cfg = RunConfig::default();
    let mut all = true;

    let t = Instant::now();
    all &= report("1", "background identities", t.elapsed().as_secs_f64(), &background_identities());

    let t = Instant::now();
    let zero1 = in_pool(1, zero_run);
    let secs2 = t.elapsed().as_secs_f64();
    let o2 = match &zero1 {
        Ok((z, steps, _)) => Outcome { pass: *z && *steps == 1000, detail: format!("{steps} steps at 128x128, bitwise zero {z}") },
        Err(e) => Outcome { pass: false, detail: format!("error: {e}") },
    };
    all &= report("2", "well-balanced", secs2, &Ok(o2));

    let t = Instant::now();
    let o = steady_residual(&cfg);
    all &= report("3", "steady residual", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let o = equivalence(&cfg);
    all &= report("4", "formulation equivalence", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let o = mms(&cfg);
    all &= report("5", "manufactured solutions", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let dir1 = tempfile::tempdir().expect("tempdir");
    let sweep1 = in_pool(1, || sweep(&cfg, Some(dir1.path())));
    let secs6 = t.elapsed().as_secs_f64();
    for (sub, o) in ["a", "b", "c", "d"].iter().zip(stability(&sweep1, &cfg)) {
        all &= report(&format!("6{sub}"), "stability sweep", secs6, &Ok(o));
    }

    let t = Instant::now();
    let o = linear_balance(&cfg);
    all &= report("7", "linearized energy balance", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let o8 = (|| -> circflow::Result<Outcome> {
        let zero4 = in_pool(4, zero_run)?;
        let same2 = matches!(&zero1, Ok(z) if z.2 == zero4.2);
        let dir4 = tempfile::tempdir()?;
        in_pool(4, || sweep(&cfg, Some(dir4.path())))?;
        let n = cfg.sweep.epsilons.len();
        let same6 = sweep1.is_ok() && read_sweep_csvs(dir1.path(), n) == read_sweep_csvs(dir4.path(), n);
        Ok(Outcome { pass: same2 && same6, detail: format!("1 vs 4 threads: zero-run CSV identical {same2}, sweep CSVs identical {same6}") })
    })();
    all &= report("8", "determinism", t.elapsed().as_secs_f64(), &o8);

    if !all {
        std::process::exit(1);
    }
}
