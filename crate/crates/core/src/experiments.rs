//! The experiment suite: refinement-ladder checks, stability runs, epsilon
//! sweeps and the manufactured-solution study. Each returns a plain report
//! with its own pass/fail verdict so the command-line driver, the examples
//! and the tests all judge results the same way.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::background::{background_residual, BackgroundField, FlowParams};
use crate::diagnostics::{energy_balance, n_functional, theorem_ratio, Sample, TimeSeries};
use crate::dynamics::{make_bump_ic, rhs_parts, rhs_primitive, Bump, RhsMode, State};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_snapshot, timeseries_csv, write_atomic, write_snapshot, InitialCondition, RunConfig};
use crate::mms::{convergence_study, ConvergenceStudy};
use crate::operators::{Field, Grid, GridSpec};
use crate::quadrature::l2r;
use crate::reduce::observed_order;
use crate::timestepper::{Observer, Problem, Run};

fn check_ladder(ladder: &[usize]) -> Result<()> {
    if ladder.len() < 3 {
        return Err(Error::Usage(format!("a refinement ladder needs at least 3 grids (got {})", ladder.len())));
    }
    if ladder.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Usage(format!("ladder grids must double: {ladder:?}")));
    }
    Ok(())
}

/// Ladder spacing proxy: `1 / n`.
fn spacing(ladder: &[usize]) -> Vec<f64> {
    ladder.iter().map(|&n| 1.0 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyRow {
    pub n: usize,
    pub continuity: f64,
    pub r_momentum: f64,
    pub theta_momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyCheck {
    pub rows: Vec<SteadyRow>,
    pub r_order: f64,
    pub max_exact: f64,
    pub pass: bool,
}

impl SteadyCheck {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("grid,continuity,r_momentum,theta_momentum\n");
        for r in &self.rows {
            s += &format!("{},{},{},{}\n", r.n, fmt_f64(r.continuity), fmt_f64(r.r_momentum), fmt_f64(r.theta_momentum));
        }
        s
    }
}

/// Residual of the steady equations on the background across a ladder.
pub fn steady_check(
    params: &FlowParams,
    template: &GridSpec,
    ladder: &[usize],
    min_order: f64,
    exact_tol: f64,
) -> Result<SteadyCheck> {
    check_ladder(ladder)?;
    let rows = ladder
        .iter()
        .map(|&n| {
            let g = Grid::new(template.with_size(n, n))?;
            let r = background_residual(&g, params)?;
            Ok(SteadyRow { n, continuity: r.continuity, r_momentum: r.r_momentum, theta_momentum: r.theta_momentum })
        })
        .collect::<Result<Vec<_>>>()?;
    let r_order = observed_order(&spacing(ladder), &rows.iter().map(|r| r.r_momentum).collect::<Vec<_>>());
    let max_exact = rows.iter().map(|r| r.continuity.max(r.theta_momentum)).fold(0.0, f64::max);
    let pass = r_order >= min_order && max_exact <= exact_tol;
    Ok(SteadyCheck { rows, r_order, max_exact, pass })
}

/// `||rhs_prim(bg + pert) - rhs_prim(bg) - rhs_pert(pert)||_{L^2_r}`, summed
/// over the four components in quadrature.
pub fn formulation_residual(grid: &Grid, bg: &BackgroundField, pert: &State) -> Result<f64> {
    if pert.shape() != grid.shape() {
        return Err(Error::ShapeMismatch { expected: grid.shape(), got: pert.shape() });
    }
    let p = &bg.params;
    let rho0 = BackgroundField::broadcast(grid, &bg.rho_bar);
    let ut0 = BackgroundField::broadcast(grid, &bg.u_theta_bar);
    let zero = Field::zeros(grid);
    let base = rhs_primitive(grid, &rho0, &zero, &ut0, &zero, p)?;
    let rho1 = rho0.axpy(1.0, &pert.phi);
    let ut1 = ut0.axpy(1.0, &pert.v_theta);
    let full = rhs_primitive(grid, &rho1, &pert.v_r, &ut1, &pert.v_z, p)?;
    let pt = rhs_parts(grid, pert, bg, RhsMode::Full)?.tendency;
    let mut sq = 0.0;
    for (k, f) in pt.fields().iter().enumerate() {
        let d = full[k].axpy(-1.0, &base[k]).axpy(-1.0, f);
        sq += l2r(grid, &d).powi(2);
    }
    Ok(sq.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderCheck {
    pub grids: Vec<usize>,
    pub values: Vec<f64>,
    pub order: f64,
    pub pass: bool,
}

impl LadderCheck {
    pub fn to_csv(&self, column: &str) -> String {
        let mut s = format!("grid,{column}\n");
        for (n, v) in self.grids.iter().zip(&self.values) {
            s += &format!("{n},{}\n", fmt_f64(*v));
        }
        s
    }
}

fn ladder_check<F>(params: &FlowParams, template: &GridSpec, ladder: &[usize], min_order: f64, f: F) -> Result<LadderCheck>
where
    F: Fn(&Grid, &BackgroundField) -> Result<f64>,
{
    check_ladder(ladder)?;
    let values = ladder
        .iter()
        .map(|&n| {
            let g = Grid::new(template.with_size(n, n))?;
            let bg = BackgroundField::new(&g, params)?;
            f(&g, &bg)
        })
        .collect::<Result<Vec<_>>>()?;
    let order = observed_order(&spacing(ladder), &values);
    Ok(LadderCheck { grids: ladder.to_vec(), pass: order >= min_order, values, order })
}

/// Primitive versus perturbation form for a fixed smooth perturbation.
pub fn equivalence_check(
    params: &FlowParams,
    template: &GridSpec,
    ladder: &[usize],
    bump: &Bump,
    min_order: f64,
) -> Result<LadderCheck> {
    ladder_check(params, template, ladder, min_order, |g, bg| {
        formulation_residual(g, bg, &make_bump_ic(g, bump)?)
    })
}

/// Semi-discrete residual of the weighted L^2 energy identity of the
/// linearized system.
pub fn balance_check(
    params: &FlowParams,
    template: &GridSpec,
    ladder: &[usize],
    bump: &Bump,
    min_order: f64,
) -> Result<LadderCheck> {
    ladder_check(params, template, ladder, min_order, |g, bg| {
        Ok(energy_balance(g, bg, &make_bump_ic(g, bump)?)?.residual.abs())
    })
}

/// Writes snapshots as samples arrive and the partial series on failure.
pub struct OutputSink {
    pub dir: Option<PathBuf>,
    pub snapshot_every: usize,
    pub grid: GridSpec,
    pub params: FlowParams,
    pub snapshots: Vec<PathBuf>,
}

impl OutputSink {
    pub fn new(cfg: &RunConfig, dir: Option<&Path>) -> OutputSink {
        OutputSink {
            dir: dir.map(Path::to_path_buf),
            snapshot_every: cfg.outputs.snapshot_every,
            grid: cfg.grid.clone(),
            params: cfg.params,
            snapshots: Vec::new(),
        }
    }
}

impl Observer for OutputSink {
    fn on_sample(&mut self, sample: &Sample, state: &State) -> Result<()> {
        if let Some(dir) = &self.dir {
            if self.snapshot_every > 0 && sample.step % self.snapshot_every == 0 {
                let path = dir.join(format!("snapshot_{:08}.bin", sample.step));
                write_snapshot(&path, &self.grid, &self.params, sample.t, sample.step, state)?;
                self.snapshots.push(path);
            }
        }
        Ok(())
    }

    fn on_failure(&mut self, series: &TimeSeries, _error: &Error) {
        if let Some(dir) = &self.dir {
            // best effort: the run is already failing
            let _ = write_atomic(&dir.join("timeseries.csv"), timeseries_csv(series).as_bytes());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveSummary {
    pub amplitude: f64,
    pub steps: usize,
    pub t: f64,
    pub cadence: usize,
    pub initial_norm_sq: f64,
    pub theorem_ratio: Option<f64>,
    pub n_final: f64,
    pub max_n: f64,
    /// `int_0^T A_i dtau`, i = 1, 2, 3
    pub a_integrals: [f64; 3],
    pub max_monitor: f64,
    pub contamination_limit: f64,
    pub contaminated: bool,
}

impl EvolveSummary {
    pub fn from_run(run: &Run, initial_max: f64, threshold: f64, amplitude: f64) -> EvolveSummary {
        let n = n_functional(&run.series);
        let last = run.series.last();
        let limit = threshold * initial_max;
        let max_monitor = run.series.max_monitor();
        EvolveSummary {
            amplitude,
            steps: run.steps,
            t: run.t,
            cadence: run.series.cadence,
            initial_norm_sq: run.series.initial_norm_sq,
            theorem_ratio: theorem_ratio(&run.series),
            n_final: n.last().copied().unwrap_or(0.0),
            max_n: n.iter().copied().fold(0.0, f64::max),
            a_integrals: last.map(|s| s.integrals.a).unwrap_or_default(),
            max_monitor,
            contamination_limit: limit,
            contaminated: max_monitor > limit,
        }
    }

    /// `|int A_i| / N(T)^(3/2)`; `None` when `N(T) = 0`.
    pub fn a_ratios(&self) -> Option<[f64; 3]> {
        (self.n_final > 0.0).then(|| self.a_integrals.map(|a| a.abs() / self.n_final.powf(1.5)))
    }
}

/// One stability run as configured. With `out`, writes `timeseries.csv`,
/// `summary.json`, `config.json` and any snapshots there.
pub fn run_evolve(cfg: &RunConfig, out: Option<&Path>) -> Result<(Run, EvolveSummary)> {
    run_evolve_from(cfg, None, out)
}

/// As [`run_evolve`], optionally continuing from a snapshot written by an
/// earlier run on the same grid. The contamination limit still refers to
/// the configured initial condition.
pub fn run_evolve_from(cfg: &RunConfig, resume: Option<&Path>, out: Option<&Path>) -> Result<(Run, EvolveSummary)> {
    let mut problem = Problem::new(cfg.grid.clone(), &cfg.params, cfg.rhs)?;
    problem.monitor_margin = cfg.monitor_margin();
    let initial = cfg.ic.build(&problem.grid)?;
    if let Some(dir) = out {
        write_atomic(&dir.join("config.json"), cfg.to_json().as_bytes())?;
    }
    let mut sink = OutputSink::new(cfg, out);
    let run = match resume {
        None => problem.evolve(&initial, &cfg.control, &mut sink)?,
        Some(path) => {
            let (meta, state) = read_snapshot(path, Some(&cfg.grid))?;
            if meta.params != cfg.params {
                return Err(Error::Snapshot("snapshot flow parameters differ from the configuration".into()));
            }
            problem.evolve_from(&state, meta.t, meta.step, &cfg.control, &mut sink)?
        }
    };
    let summary =
        EvolveSummary::from_run(&run, initial.max_abs(), cfg.outputs.contamination_threshold, cfg.ic.amplitude());
    if let Some(dir) = out {
        write_atomic(&dir.join("timeseries.csv"), timeseries_csv(&run.series).as_bytes())?;
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_atomic(&dir.join("summary.json"), json.as_bytes())?;
    }
    Ok((run, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub runs: Vec<EvolveSummary>,
    /// `max / min - 1` of `N(T) / eps^2`
    pub n_spread: f64,
    /// `max / min` of the bound constant
    pub ratio_factor: f64,
    /// `max / min` of `|int A_i| / N^(3/2)` per i
    pub a_factors: [f64; 3],
    pub contaminated: bool,
    pub pass: bool,
}

/// `max / min`; infinite when any value is missing, non-finite or zero.
fn factor(v: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = v.collect();
    if vals.is_empty() || vals.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,steps,n_final,n_over_eps2,theorem_ratio,a1_ratio,a2_ratio,a3_ratio,max_monitor,contaminated\n");
        for r in &self.runs {
            let a = r.a_ratios().unwrap_or([f64::NAN; 3]);
            s += &format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                fmt_f64(r.amplitude),
                r.steps,
                fmt_f64(r.n_final),
                fmt_f64(r.n_final / (r.amplitude * r.amplitude)),
                r.theorem_ratio.map(fmt_f64).unwrap_or_default(),
                fmt_f64(a[0]),
                fmt_f64(a[1]),
                fmt_f64(a[2]),
                fmt_f64(r.max_monitor),
                r.contaminated
            );
        }
        s
    }
}

/// Re-run the configured bump at every amplitude in `cfg.sweep.epsilons`.
/// Per-run outputs go to `out/eps_<k>/`.
pub fn sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<SweepReport> {
    let base = match cfg.ic {
        InitialCondition::Bump(b) => b,
        InitialCondition::Zero => return Err(Error::Usage("sweep needs a bump initial condition".into())),
    };
    if cfg.sweep.epsilons.is_empty() {
        return Err(Error::Usage("sweep needs at least one epsilon".into()));
    }
    let mut runs = Vec::new();
    for (k, &eps) in cfg.sweep.epsilons.iter().enumerate() {
        let mut c = cfg.clone();
        c.ic = InitialCondition::Bump(base.with_amplitude(eps));
        let dir = out.map(|d| d.join(format!("eps_{k}")));
        runs.push(run_evolve(&c, dir.as_deref())?.1);
    }
    let n_spread = factor(runs.iter().map(|r| r.n_final / (r.amplitude * r.amplitude))) - 1.0;
    let ratio_factor = factor(runs.iter().map(|r| r.theorem_ratio.unwrap_or(f64::NAN)));
    let a_factors = [0, 1, 2].map(|i| factor(runs.iter().map(|r| r.a_ratios().map(|a| a[i]).unwrap_or(f64::NAN))));
    let contaminated = runs.iter().any(|r| r.contaminated);
    let s = &cfg.sweep;
    let pass = !contaminated
        && n_spread <= s.n_spread
        && ratio_factor <= s.ratio_factor
        && a_factors.iter().all(|f| *f <= s.a_factor);
    let report = SweepReport { runs, n_spread, ratio_factor, a_factors, contaminated, pass };
    if let Some(dir) = out {
        write_atomic(&dir.join("sweep.csv"), report.to_csv().as_bytes())?;
        write_atomic(&dir.join("sweep.json"), serde_json::to_string_pretty(&report).expect("serializes").as_bytes())?;
    }
    Ok(report)
}

/// The configured manufactured-solution study and its verdict.
pub fn convergence(cfg: &RunConfig, out: Option<&Path>) -> Result<(ConvergenceStudy, bool)> {
    let c = &cfg.convergence;
    let study = convergence_study(&c.case, &c.ladder, c.t_end, c.cfl_safety, c.forcing)?;
    if let Some(dir) = out {
        write_atomic(&dir.join("convergence.csv"), study.to_csv().as_bytes())?;
    }
    let pass = study.min_slope() >= c.min_slope && study.monotone;
    Ok((study, pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_ladders_refused() {
        let p = FlowParams::default();
        let g = GridSpec::default();
        assert!(matches!(steady_check(&p, &g, &[32, 64], 1.8, 1e-12), Err(Error::Usage(_))));
        assert!(matches!(equivalence_check(&p, &g, &[32, 64, 100], &Bump::default(), 1.8), Err(Error::Usage(_))));
    }

    #[test]
    fn zero_perturbation_zero_residual() {
        let g = Grid::new(GridSpec::default().with_size(32, 32)).unwrap();
        let bg = BackgroundField::new(&g, &FlowParams::default()).unwrap();
        assert_eq!(formulation_residual(&g, &bg, &State::zeros(&g)).unwrap(), 0.0);
        let other = Grid::new(GridSpec::default().with_size(32, 48)).unwrap();
        assert!(matches!(
            formulation_residual(&g, &bg, &State::zeros(&other)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn sweep_usage_errors() {
        let mut cfg = RunConfig::default();
        cfg.sweep.epsilons.clear();
        assert!(matches!(sweep(&cfg, None), Err(Error::Usage(_))));
        cfg.sweep.epsilons = vec![1e-3];
        cfg.ic = InitialCondition::Zero;
        assert!(matches!(sweep(&cfg, None), Err(Error::Usage(_))));
    }

    #[test]
    fn factor_of_values() {
        assert_eq!(factor([2.0, 1.0, 4.0].into_iter()), 4.0);
        assert_eq!(factor([0.0, 1.0].into_iter()), f64::INFINITY);
        assert_eq!(factor([f64::NAN, 1.0].into_iter()), f64::INFINITY);
        assert_eq!(factor(std::iter::empty()), f64::INFINITY);
    }
}
