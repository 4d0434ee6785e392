//! Manufactured-solution verification of the full discretization.
//!
//! Each component of the manufactured state is separable,
//! `amp * g(r) * sin(k kappa z + phase_z) * cos(omega t + phase_t)` with
//! `kappa = 2 pi / L_z`. Velocities use `g = (r - 1)(r_max - r) E(r)` so they
//! vanish on both radial walls; the density perturbation uses `g = E(r)`,
//! with `E` a Gaussian centred in the radial interval.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{bar_rho, bar_rho_prime, pow_short, BackgroundField, FlowParams};
use crate::dynamics::{rhs_parts, RhsMode, State};
use crate::error::{Error, Result};
use crate::operators::{Field, Grid, GridSpec, ZBoundary};
use crate::quadrature::l2r;
use crate::reduce::observed_order;
use crate::timestepper::{rk4, stable_dt};

/// One separable component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub amplitude: f64,
    /// axial wavenumber in units of `2 pi / L_z`
    pub k: u32,
    pub phase_z: f64,
    pub omega: f64,
    pub phase_t: f64,
}

/// Value and partial derivatives at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub r: f64,
    pub z: f64,
    pub rr: f64,
    pub zz: f64,
    pub rz: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManufacturedCase {
    pub params: FlowParams,
    /// domain template; the node counts come from the ladder
    pub grid: GridSpec,
    pub r_center: f64,
    pub r_width: f64,
    pub phi: Mode,
    pub v_r: Mode,
    pub v_theta: Mode,
    pub v_z: Mode,
}

impl Default for ManufacturedCase {
    fn default() -> Self {
        let m = |amplitude, k, phase_z, omega, phase_t| Mode { amplitude, k, phase_z, omega, phase_t };
        ManufacturedCase {
            params: FlowParams::default(),
            grid: GridSpec {
                n_r: 32,
                n_z: 32,
                r_max: 4.0,
                z_min: 0.0,
                z_max: 2.0 * std::f64::consts::PI,
                beta: 0.5,
                z_boundary: ZBoundary::Periodic,
            },
            r_center: 2.5,
            r_width: 0.7,
            phi: m(0.05, 1, 0.0, 1.0, 0.0),
            v_r: m(0.04, 1, 0.5 * std::f64::consts::PI, 1.3, 0.3),
            v_theta: m(0.04, 2, 0.4, 0.7, 1.0),
            v_z: m(0.04, 1, 0.0, 1.1, 0.5),
        }
    }
}

impl ManufacturedCase {
    /// All amplitudes set to zero.
    pub fn zero() -> ManufacturedCase {
        let mut c = ManufacturedCase::default();
        for m in [&mut c.phi, &mut c.v_r, &mut c.v_theta, &mut c.v_z] {
            m.amplitude = 0.0;
        }
        c
    }

    /// Freeze time: every component becomes `amp * g * Z * cos(phase_t)`.
    pub fn steady(mut self) -> ManufacturedCase {
        for m in [&mut self.phi, &mut self.v_r, &mut self.v_theta, &mut self.v_z] {
            m.omega = 0.0;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !self.grid.periodic_z() {
            return Err(Error::InvalidParams("manufactured cases need a periodic z direction".into()));
        }
        if !(self.r_width > 0.0) {
            return Err(Error::InvalidParams("r_width > 0".into()));
        }
        Ok(())
    }

    fn kappa(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.grid.z_max - self.grid.z_min)
    }

    /// `(g, g', g'')` of the radial factor.
    fn radial(&self, r: f64, walls: bool) -> [f64; 3] {
        let s = self.r_width;
        let x = (r - self.r_center) / s;
        let e = (-x * x).exp();
        let e1 = -2.0 * x / s * e;
        let e2 = (4.0 * x * x - 2.0) / (s * s) * e;
        if !walls {
            return [e, e1, e2];
        }
        let rm = self.grid.r_max;
        let p = (r - 1.0) * (rm - r);
        let p1 = rm + 1.0 - 2.0 * r;
        let p2 = -2.0;
        [p * e, p1 * e + p * e1, p2 * e + 2.0 * p1 * e1 + p * e2]
    }

    /// `(Z, Z', Z'')` of the axial factor.
    fn axial(&self, m: &Mode, z: f64) -> [f64; 3] {
        let kk = m.k as f64 * self.kappa();
        let (sz, cz) = (kk * (z - self.grid.z_min) + m.phase_z).sin_cos();
        [sz, kk * cz, -kk * kk * sz]
    }

    /// `(T, T')` of the time factor.
    fn temporal(m: &Mode, t: f64) -> [f64; 2] {
        let (st, ct) = (m.omega * t + m.phase_t).sin_cos();
        [ct, -m.omega * st]
    }

    fn assemble(m: &Mode, g: [f64; 3], zf: [f64; 3], tf: [f64; 2]) -> Jet {
        let a = m.amplitude * tf[0];
        Jet {
            v: a * g[0] * zf[0],
            r: a * g[1] * zf[0],
            z: a * g[0] * zf[1],
            rr: a * g[2] * zf[0],
            zz: a * g[0] * zf[2],
            rz: a * g[1] * zf[1],
            t: m.amplitude * tf[1] * g[0] * zf[0],
        }
    }

    fn modes(&self) -> [&Mode; 4] {
        [&self.phi, &self.v_r, &self.v_theta, &self.v_z]
    }

    /// Jets of `(phi, v_r, v_theta, v_z)` at a point.
    pub fn jets(&self, r: f64, z: f64, t: f64) -> [Jet; 4] {
        let (gp, gv) = (self.radial(r, false), self.radial(r, true));
        let modes = self.modes();
        [0, 1, 2, 3].map(|c| {
            let m = modes[c];
            Self::assemble(m, if c == 0 { gp } else { gv }, self.axial(m, z), Self::temporal(m, t))
        })
    }

    /// The manufactured state sampled on `grid`.
    pub fn sample(&self, grid: &Grid, t: f64) -> State {
        let pick = |c: usize| Field::from_fn(grid, |r, z| self.jets(r, z, t)[c].v);
        let mut s = State { phi: pick(0), v_r: pick(1), v_theta: pick(2), v_z: pick(3) };
        s.enforce_velocity_bc(grid);
        s
    }

    /// Continuous right-hand side of the full nonlinear system at a point,
    /// written in primitive form about the background.
    pub fn exact_rhs(&self, r: f64, z: f64, t: f64) -> Result<[f64; 4]> {
        let p = &self.params;
        let rb = bar_rho(r, p)?;
        self.rhs_from_jets(r, rb, bar_rho_prime(r, p)?, &self.jets(r, z, t))
    }

    fn rhs_from_jets(&self, r: f64, rb: f64, rbp: f64, jets: &[Jet; 4]) -> Result<[f64; 4]> {
        let p = &self.params;
        let [ph, vr, vt, vz] = *jets;
        let rho = rb + ph.v;
        if !(rho > 0.0) {
            return Err(Error::InvalidParams(format!("manufactured density {rho} at r = {r} is not positive")));
        }
        let rho_r = rbp + ph.r;
        let ag = p.a * p.gamma;
        let ub = p.m0 / r;
        let inv = 1.0 / rho;

        let dphi = -(rho_r * vr.v + rho * (vr.r + vr.v / r) + ph.z * vz.v + rho * vz.z);

        let press_r = ag * (pow_short(rho, p.gamma - 2.0) * rho_r - pow_short(rb, p.gamma - 2.0) * rbp);
        let press_z = ag * pow_short(rho, p.gamma - 2.0) * ph.z;
        let lap_s = |w: &Jet| w.rr + w.r / r - w.v / (r * r) + w.zz;
        let lap_a = |w: &Jet| w.rr + w.r / r + w.zz;
        let dr_div = vr.rr + vr.r / r - vr.v / (r * r) + vz.rz;
        let dz_div = vr.rz + vr.z / r + vz.zz;

        let dvr = -(vr.v * vr.r + vz.v * vr.z) + (2.0 * ub * vt.v + vt.v * vt.v) / r - press_r
            + inv * (p.nu1 * lap_s(&vr) + p.nu2 * dr_div);
        let dvt = -(vr.v * vt.r + vz.v * vt.z + vt.v * vr.v / r) + inv * p.nu1 * lap_s(&vt);
        let dvz = -(vr.v * vz.r + vz.v * vz.z) - press_z + inv * (p.nu1 * lap_a(&vz) + p.nu2 * dz_div);
        Ok([dphi, dvr, dvt, dvz])
    }

    /// Exact `d_t` of the manufactured state.
    pub fn exact_dt(&self, r: f64, z: f64, t: f64) -> [f64; 4] {
        self.jets(r, z, t).map(|j| j.t)
    }

    /// Jets on every node of `grid`, row by row, handed to `f(i, r, jets)`.
    fn jets_on_grid<T, F>(&self, grid: &Grid, t: f64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, f64, &[Jet; 4]) -> Result<T> + Sync,
    {
        let nz = grid.nz();
        let modes = self.modes();
        let tf = modes.map(|m| Self::temporal(m, t));
        let zf: Vec<[[f64; 3]; 4]> = grid.z_nodes.iter().map(|&z| modes.map(|m| self.axial(m, z))).collect();
        let rows: Vec<Vec<T>> = (0..grid.nr())
            .into_par_iter()
            .map(|i| {
                let r = grid.r_nodes[i];
                let (gp, gv) = (self.radial(r, false), self.radial(r, true));
                (0..nz)
                    .map(|j| {
                        let jets = [0, 1, 2, 3]
                            .map(|c| Self::assemble(modes[c], if c == 0 { gp } else { gv }, zf[j][c], tf[c]));
                        f(i, r, &jets)
                    })
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<_>>()?;
        Ok(rows.into_iter().flatten().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    /// `d_t u* - RHS(u*)` with the continuous right-hand side: the discrete
    /// solution then carries the full truncation error of the scheme.
    #[default]
    Analytic,
    /// `d_t u* - RHS_h(u*)` with the discrete right-hand side: `u*` solves the
    /// forced semi-discrete system exactly, leaving only time-stepping error.
    Discrete,
}

/// Forcing fields that make the manufactured solution solve the forced system.
pub fn manufactured_forcing(
    case: &ManufacturedCase,
    t: f64,
    grid: &Grid,
    bg: &BackgroundField,
    kind: ForcingKind,
) -> Result<State> {
    let (nr, nz) = grid.shape();
    let to_state = |vals: Vec<[f64; 4]>| -> Result<State> {
        let pick = |c: usize| Field::from_vec(nr, nz, vals.iter().map(|v| v[c]).collect());
        Ok(State { phi: pick(0)?, v_r: pick(1)?, v_theta: pick(2)?, v_z: pick(3)? })
    };
    let mut f = match kind {
        ForcingKind::Discrete => {
            let dt = to_state(case.jets_on_grid(grid, t, |_, _, j| Ok(j.map(|x| x.t)))?)?;
            dt.axpy(-1.0, &rhs_parts(grid, &case.sample(grid, t), bg, RhsMode::Full)?.tendency)
        }
        ForcingKind::Analytic => to_state(case.jets_on_grid(grid, t, |i, r, j| {
            let rhs = case.rhs_from_jets(r, bg.rho_bar[i], bg.rho_bar_prime[i], j)?;
            Ok([0, 1, 2, 3].map(|c| j[c].t - rhs[c]))
        })?)?,
    };
    f.enforce_velocity_bc(grid);
    Ok(f)
}

/// Result of one forced (or unforced) run on a single grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRun {
    pub n: usize,
    pub h: f64,
    pub steps: usize,
    /// `L^2_r` error of `(phi, v_r, v_theta, v_z)` at `t_end`
    pub errors: [f64; 4],
}

/// Evolve the manufactured initial data to `t_end` on an `n x n` grid.
/// `forcing = None` is the ablation run.
pub fn run_case(
    case: &ManufacturedCase,
    n: usize,
    t_end: f64,
    cfl_safety: f64,
    forcing: Option<ForcingKind>,
) -> Result<GridRun> {
    case.validate()?;
    let grid = Grid::new(case.grid.with_size(n, n))?;
    let bg = BackgroundField::new(&grid, &case.params)?;
    let mut s = case.sample(&grid, 0.0);
    let dt0 = stable_dt(&grid, &bg, &s, cfl_safety)?;
    let steps = (t_end / dt0).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    for k in 0..steps {
        let t = k as f64 * dt;
        s = rk4(&s, t, dt, None, |tau, u| {
            let mut d = rhs_parts(&grid, u, &bg, RhsMode::Full)?.tendency;
            if let Some(kind) = forcing {
                d = d.axpy(1.0, &manufactured_forcing(case, tau, &grid, &bg, kind)?);
            }
            Ok(d)
        })
        .map_err(|e| Error::Step { step: k + 1, source: Box::new(e) })?;
        s.enforce_velocity_bc(&grid);
        s.check_finite().map_err(|e| Error::Step { step: k + 1, source: Box::new(e) })?;
    }
    let exact = case.sample(&grid, t_end);
    let err = s.axpy(-1.0, &exact);
    let errors = [l2r(&grid, &err.phi), l2r(&grid, &err.v_r), l2r(&grid, &err.v_theta), l2r(&grid, &err.v_z)];
    let h = (grid.dxi * (grid.spec.r_max - 1.0) * grid.dz).sqrt();
    Ok(GridRun { n, h, steps, errors })
}

pub const COMPONENTS: [&str; 4] = ["phi", "v_r", "v_theta", "v_z"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub runs: Vec<GridRun>,
    /// least-squares log-log slopes per component
    pub slopes: [f64; 4],
    /// errors strictly decrease along the ladder for every component
    pub monotone: bool,
}

impl ConvergenceStudy {
    pub fn min_slope(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `grid,component,error,slope` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid,component,error,slope\n");
        for run in &self.runs {
            for (c, name) in COMPONENTS.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", run.n, name, run.errors[c], self.slopes[c]));
            }
        }
        out
    }

    /// Inverse of [`to_csv`](Self::to_csv) (grid sizes, errors and slopes).
    pub fn from_csv(text: &str) -> Result<ConvergenceStudy> {
        let bad = |m: String| Error::Io(format!("study csv: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some("grid,component,error,slope") {
            return Err(bad("missing header".into()));
        }
        let mut runs: Vec<GridRun> = Vec::new();
        let mut slopes = [f64::NAN; 4];
        for line in lines.filter(|l| !l.is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(format!("row `{line}`")));
            }
            let n: usize = cols[0].parse().map_err(|_| bad(format!("grid `{}`", cols[0])))?;
            let c = COMPONENTS.iter().position(|x| *x == cols[1]).ok_or_else(|| bad(format!("component `{}`", cols[1])))?;
            let e: f64 = cols[2].parse().map_err(|_| bad(format!("error `{}`", cols[2])))?;
            let s: f64 = cols[3].parse().map_err(|_| bad(format!("slope `{}`", cols[3])))?;
            if runs.last().map(|r| r.n) != Some(n) {
                runs.push(GridRun { n, h: 1.0 / n as f64, steps: 0, errors: [f64::NAN; 4] });
            }
            runs.last_mut().expect("pushed").errors[c] = e;
            slopes[c] = s;
        }
        let monotone = monotone(&runs);
        Ok(ConvergenceStudy { runs, slopes, monotone })
    }
}

fn monotone(runs: &[GridRun]) -> bool {
    runs.windows(2).all(|w| (0..4).all(|c| w[1].errors[c] < w[0].errors[c]))
}

/// Forced runs on every ladder grid and the observed orders.
pub fn convergence_study(
    case: &ManufacturedCase,
    ladder: &[usize],
    t_end: f64,
    cfl_safety: f64,
    kind: ForcingKind,
) -> Result<ConvergenceStudy> {
    if ladder.len() < 3 {
        return Err(Error::Usage(format!("a convergence ladder needs at least 3 grids (got {})", ladder.len())));
    }
    if ladder.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Usage(format!("ladder grids must double: {ladder:?}")));
    }
    let runs: Vec<GridRun> = ladder
        .par_iter()
        .map(|&n| run_case(case, n, t_end, cfl_safety, Some(kind)))
        .collect::<Result<_>>()?;
    let h: Vec<f64> = runs.iter().map(|r| r.h).collect();
    let slopes = [0, 1, 2, 3].map(|c| observed_order(&h, &runs.iter().map(|r| r.errors[c]).collect::<Vec<_>>()));
    let monotone = monotone(&runs);
    Ok(ConvergenceStudy { runs, slopes, monotone })
}
