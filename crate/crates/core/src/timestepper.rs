//! Explicit RK4 under a CFL/viscous step restriction, and the evolve driver
//! that samples diagnostics along the way.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{pow_short, BackgroundField, FlowParams};
use crate::diagnostics::{Sample, TimeSeries, Tracker};
use crate::dynamics::{rhs_parts, RhsMode, RhsParts, State};
use crate::error::{Error, Result};
use crate::operators::{Grid, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    pub cfl_safety: f64,
    pub t_end: f64,
    pub max_steps: usize,
    pub diag_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { cfl_safety: 0.4, t_end: 5.0, max_steps: 1_000_000, diag_every: 10 }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParams(format!("cfl_safety in (0, 1] (got {})", self.cfl_safety)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParams(format!("t_end > 0 (got {})", self.t_end)));
        }
        if self.max_steps == 0 || self.diag_every == 0 {
            return Err(Error::InvalidParams("max_steps and diag_every must be positive".into()));
        }
        Ok(())
    }
}

/// `cfl_safety * min(dt_adv, dt_visc)` over all nodes.
pub fn stable_dt(grid: &Grid, bg: &BackgroundField, state: &State, cfl_safety: f64) -> Result<f64> {
    let p = &bg.params;
    let nu = p.nu1 + p.nu2.max(0.0);
    let (nr, nz) = grid.shape();
    let dt = (0..nr)
        .into_par_iter()
        .map(|i| {
            let delta = grid.dr_local(i).min(grid.dz);
            let mut m = f64::INFINITY;
            for j in 0..nz {
                let rho = bg.rho_bar[i] + state.phi.get(i, j);
                let ut = bg.u_theta_bar[i] + state.v_theta.get(i, j);
                let (ur, uz) = (state.v_r.get(i, j), state.v_z.get(i, j));
                let speed = (ur * ur + ut * ut + uz * uz).sqrt();
                let c = (p.gamma * p.a * pow_short(rho, p.gamma - 1.0)).sqrt();
                m = m.min(delta / (speed + c));
                if nu > 0.0 {
                    m = m.min(rho * delta * delta / (4.0 * nu));
                }
            }
            m
        })
        .reduce(|| f64::INFINITY, f64::min);
    let dt = cfl_safety * dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidGrid(format!("degenerate stable time step {dt}")));
    }
    Ok(dt)
}

/// Classical RK4 for `du/dt = rhs(t, u)`; `k1` may be supplied when the
/// caller already evaluated it.
pub fn rk4<F>(state: &State, t: f64, dt: f64, k1: Option<State>, mut rhs: F) -> Result<State>
where
    F: FnMut(f64, &State) -> Result<State>,
{
    let k1 = match k1 {
        Some(k) => k,
        None => rhs(t, state)?,
    };
    let k2 = rhs(t + 0.5 * dt, &state.axpy(0.5 * dt, &k1))?;
    let k3 = rhs(t + 0.5 * dt, &state.axpy(0.5 * dt, &k2))?;
    let k4 = rhs(t + dt, &state.axpy(dt, &k3))?;
    let sum = k1.axpy(2.0, &k2).axpy(2.0, &k3).axpy(1.0, &k4);
    Ok(state.axpy(dt / 6.0, &sum))
}

/// One RK4 step of the perturbation system, with wall re-zeroing and the
/// NaN / vacuum checks.
pub fn rk4_step(grid: &Grid, bg: &BackgroundField, state: &State, dt: f64, mode: RhsMode) -> Result<State> {
    let mut next = rk4(state, 0.0, dt, None, |_, s| Ok(rhs_parts(grid, s, bg, mode)?.tendency))?;
    finish_step(grid, bg, &mut next)?;
    Ok(next)
}

fn finish_step(grid: &Grid, bg: &BackgroundField, next: &mut State) -> Result<()> {
    next.enforce_velocity_bc(grid);
    next.check_finite()?;
    next.check_positivity(bg)
}

/// Receives every diagnostic sample as it is produced.
pub trait Observer {
    fn on_sample(&mut self, _sample: &Sample, _state: &State) -> Result<()> {
        Ok(())
    }
    /// Called once with everything recorded so far when a step fails.
    fn on_failure(&mut self, _series: &TimeSeries, _error: &Error) {}
}

impl Observer for () {}

/// Grid, background and right-hand-side mode of one experiment.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub bg: BackgroundField,
    pub mode: RhsMode,
    /// band width (nodes) of the contamination monitor
    pub monitor_margin: usize,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub state: State,
    pub series: TimeSeries,
    pub steps: usize,
    pub t: f64,
}

impl Problem {
    pub fn new(spec: GridSpec, params: &FlowParams, mode: RhsMode) -> Result<Problem> {
        let grid = Grid::new(spec)?;
        let bg = BackgroundField::new(&grid, params)?;
        let monitor_margin = (grid.nr().min(grid.nz()) / 16).max(1);
        Ok(Problem { grid, bg, mode, monitor_margin })
    }

    pub fn rhs(&self, state: &State) -> Result<RhsParts> {
        rhs_parts(&self.grid, state, &self.bg, self.mode)
    }

    pub fn stable_dt(&self, state: &State, cfl_safety: f64) -> Result<f64> {
        stable_dt(&self.grid, &self.bg, state, cfl_safety)
    }

    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        rk4_step(&self.grid, &self.bg, state, dt, self.mode)
    }

    /// Advance `initial` to `control.t_end` (or `max_steps`), sampling every
    /// `diag_every` steps. The last step is shortened to land on `t_end`.
    pub fn evolve(&self, initial: &State, control: &StepControl, observer: &mut dyn Observer) -> Result<Run> {
        self.evolve_from(initial, 0.0, 0, control, observer)
    }

    /// Continue from a state captured at time `t0` after `step0` steps.
    /// Step indices, sampling and the final clipped step line up with an
    /// unbroken run; time integrals restart at `t0`.
    pub fn evolve_from(
        &self,
        initial: &State,
        t0: f64,
        step0: usize,
        control: &StepControl,
        observer: &mut dyn Observer,
    ) -> Result<Run> {
        control.validate()?;
        if !(t0 >= 0.0 && t0 <= control.t_end) {
            return Err(Error::InvalidParams(format!("start time {t0} outside [0, {}]", control.t_end)));
        }
        let mut state = initial.clone();
        state.enforce_velocity_bc(&self.grid);
        state.check_finite()?;
        state.check_positivity(&self.bg)?;

        let mut tracker = Tracker::new(&self.grid, &state, control.diag_every, self.monitor_margin)?;
        let (mut t, mut step, mut last_dt) = (t0, step0, 0.0_f64);
        let result = (|| -> Result<()> {
            loop {
                let done = t >= control.t_end || step >= control.max_steps;
                let sample_now = step % control.diag_every == 0;
                if done && !sample_now {
                    return Ok(());
                }
                let parts = self.rhs(&state)?;
                if sample_now {
                    let sample = *tracker.record(&self.grid, &self.bg, step, t, last_dt, &state, &parts)?;
                    observer.on_sample(&sample, &state)?;
                }
                if done {
                    return Ok(());
                }
                let mut dt = self.stable_dt(&state, control.cfl_safety)?;
                let last = t + dt >= control.t_end;
                if last {
                    dt = control.t_end - t;
                }
                let advanced = rk4(&state, t, dt, Some(parts.tendency), |_, s| Ok(self.rhs(s)?.tendency))
                    .and_then(|mut next| finish_step(&self.grid, &self.bg, &mut next).map(|_| next))
                    .map_err(|e| Error::Step { step: step + 1, source: Box::new(e) })?;
                state = advanced;
                step += 1;
                t = if last { control.t_end } else { t + dt };
                last_dt = dt;
            }
        })();
        match result {
            Ok(()) => Ok(Run { state, series: tracker.into_series(), steps: step, t }),
            Err(e) => {
                observer.on_failure(tracker.series(), &e);
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{make_bump_ic, Bump};
    use crate::reduce::observed_order;

    fn problem(n: usize, params: FlowParams) -> Problem {
        Problem::new(GridSpec::default().with_size(n, n), &params, RhsMode::Full).unwrap()
    }

    #[test]
    fn control_validation() {
        assert!(StepControl::default().validate().is_ok());
        assert!(StepControl { cfl_safety: 0.0, ..Default::default() }.validate().is_err());
        assert!(StepControl { cfl_safety: 1.5, ..Default::default() }.validate().is_err());
        assert!(StepControl { t_end: -1.0, ..Default::default() }.validate().is_err());
        assert!(StepControl { diag_every: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn viscous_limited_dt_quarters_under_refinement() {
        let params = FlowParams { nu1: 5.0, ..FlowParams::default() };
        let (a, b) = (problem(32, params), problem(64, params));
        let z = |p: &Problem| State::zeros(&p.grid);
        let ratio = a.stable_dt(&z(&a), 0.4).unwrap() / b.stable_dt(&z(&b), 0.4).unwrap();
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn dt_monotone_as_viscosity_vanishes() {
        let mut prev = 0.0;
        for nu in [1.0, 0.1, 0.01, 1e-4, 1e-8] {
            let p = problem(32, FlowParams { nu1: nu, ..FlowParams::default() });
            let dt = p.stable_dt(&State::zeros(&p.grid), 0.4).unwrap();
            assert!(dt >= prev);
            prev = dt;
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let p = problem(32, FlowParams::default());
        let z = State::zeros(&p.grid);
        let dt = p.stable_dt(&z, 0.4).unwrap();
        let mut s = z.clone();
        for _ in 0..20 {
            s = p.step(&s, dt).unwrap();
        }
        assert!(s.bits_eq(&z));
    }

    #[test]
    fn step_keeps_wall_zero() {
        let p = problem(32, FlowParams::default());
        let bump = Bump { center: [3.0, 0.0], widths: [0.4, 1.0], ..Bump::default() };
        let s = make_bump_ic(&p.grid, &bump).unwrap();
        let n = p.step(&s, p.stable_dt(&s, 0.4).unwrap()).unwrap();
        for j in 0..p.grid.nz() {
            for f in n.velocity() {
                assert_eq!(f.get(0, j), 0.0);
                assert_eq!(f.get(p.grid.nr() - 1, j), 0.0);
            }
        }
    }

    #[test]
    fn fourth_order_self_convergence() {
        let p = problem(32, FlowParams::default());
        let s0 = make_bump_ic(&p.grid, &Bump::default()).unwrap();
        let dt = p.stable_dt(&s0, 0.4).unwrap();
        let t_end = 16.0 * dt;
        let run = |n: usize| {
            let mut s = s0.clone();
            for _ in 0..n {
                s = p.step(&s, t_end / n as f64).unwrap();
            }
            s
        };
        let reference = run(64);
        let err = |s: State| s.axpy(-1.0, &reference).max_abs();
        let (e1, e2) = (err(run(16)), err(run(32)));
        let order = observed_order(&[1.0, 0.5], &[e1, e2]);
        // Richardson against dt/4 reference inflates the coarse error by (1 - 4^-4)
        assert!((order - 4.0).abs() <= 0.3, "order {order}");
    }

    #[test]
    fn evolve_zero_gives_zero_diagnostics_and_row_count() {
        let p = problem(32, FlowParams::default());
        let control = StepControl { t_end: 1e9, max_steps: 23, diag_every: 5, ..Default::default() };
        let run = p.evolve(&State::zeros(&p.grid), &control, &mut ()).unwrap();
        assert_eq!(run.steps, 23);
        assert_eq!(run.series.samples.len(), 23 / 5 + 1);
        for s in &run.series.samples {
            assert!(s.report.values().iter().flatten().all(|v| *v == 0.0));
            assert_eq!(s.monitor, 0.0);
        }
        assert_eq!(crate::diagnostics::theorem_ratio(&run.series), None);
    }

    #[test]
    fn evolve_lands_on_t_end() {
        let p = problem(32, FlowParams::default());
        let s0 = make_bump_ic(&p.grid, &Bump::default()).unwrap();
        let control = StepControl { t_end: 0.3, diag_every: 1, ..Default::default() };
        let run = p.evolve(&s0, &control, &mut ()).unwrap();
        assert_eq!(run.t, 0.3);
        assert_eq!(run.series.last().unwrap().t, 0.3);
        let again = p.evolve(&s0, &control, &mut ()).unwrap();
        assert_eq!(run.series, again.series);
        assert!(run.state.bits_eq(&again.state));
    }

    #[test]
    fn resumed_run_matches_unbroken_run() {
        let p = problem(32, FlowParams::default());
        let s0 = make_bump_ic(&p.grid, &Bump::default().with_amplitude(1e-2)).unwrap();
        let full = StepControl { t_end: 1.0, diag_every: 4, ..Default::default() };
        let whole = p.evolve(&s0, &full, &mut ()).unwrap();
        let half = p.evolve(&s0, &StepControl { max_steps: 12, ..full }, &mut ()).unwrap();
        assert!(whole.steps > 12, "{}", whole.steps);
        let rest = p.evolve_from(&half.state, half.t, half.steps, &full, &mut ()).unwrap();
        assert_eq!(rest.steps, whole.steps);
        assert_eq!(rest.t, whole.t);
        assert!(rest.state.bits_eq(&whole.state));
        assert_eq!(rest.series.samples[0].step, 12);
    }

    #[test]
    fn oversized_step_is_caught() {
        let p = problem(32, FlowParams::default());
        let mut s = make_bump_ic(&p.grid, &Bump::default().with_amplitude(0.1)).unwrap();
        let dt = 200.0 * p.stable_dt(&s, 1.0).unwrap();
        let err = (0..50)
            .find_map(|_| match p.step(&s, dt) {
                Ok(n) => {
                    s = n;
                    None
                }
                Err(e) => Some(e),
            })
            .expect("unstable step must fail");
        assert!(err.is_runtime(), "{err}");
    }

    #[test]
    fn failure_flushes_recorded_samples() {
        struct StopAt(usize, Option<usize>);
        impl Observer for StopAt {
            fn on_sample(&mut self, sample: &Sample, _: &State) -> Result<()> {
                if sample.step == self.0 {
                    return Err(Error::Io("sink full".into()));
                }
                Ok(())
            }
            fn on_failure(&mut self, series: &TimeSeries, _: &Error) {
                self.1 = Some(series.samples.len());
            }
        }
        let p = problem(32, FlowParams::default());
        let s0 = make_bump_ic(&p.grid, &Bump::default()).unwrap();
        let control = StepControl { t_end: 10.0, diag_every: 2, ..Default::default() };
        let mut obs = StopAt(6, None);
        assert_eq!(p.evolve(&s0, &control, &mut obs).unwrap_err(), Error::Io("sink full".into()));
        assert_eq!(obs.1, Some(4));
    }
}
