//! Weighted norms and energy functionals of the perturbation, sampled along a
//! trajectory.
//!
//! Conventions:
//! - `(a, b)` is the plain `dr dz` inner product; every `r` or background
//!   weight is written explicitly.
//! - `||w||_{H~k}^2 = sum_{a + b <= k} ||sqrt(r) d_r^a d_z^b w||_2^2`, one term
//!   per distinct multi-index.
//! - `||D w||_{H~k}^2` sums `||d_r w||_{H~k}^2 + ||d_z w||_{H~k}^2`.
//! - Quantities with one time derivative use the exact semi-discrete
//!   tendency. Those with a second time derivative (and `d_t f`, `d_t g`)
//!   use a three-point backward difference over the last three samples and
//!   are absent for the first two samples.

use serde::{Deserialize, Serialize};

use crate::background::BackgroundField;
use crate::dynamics::{rhs_parts, RhsMode, RhsParts, State};
use crate::error::{Error, Result};
use crate::operators::{Field, Grid};
use crate::quadrature::{inner_weighted, r_sq, radial_weighted_sq};

pub use crate::quadrature::weighted_lp;

/// All mixed derivatives `d_r^a d_z^b w` with `a + b <= order`, indexed `[a][b]`.
pub struct DerivTable {
    entries: Vec<Vec<Field>>,
}

impl DerivTable {
    pub fn new(grid: &Grid, w: &Field, order: usize) -> Result<DerivTable> {
        let mut z_chain: Vec<Field> = vec![w.clone()];
        for b in 1..=order {
            let next = if b % 2 == 0 { grid.d_zz(&z_chain[b - 2])? } else { grid.d_z(&z_chain[b - 1])? };
            z_chain.push(next);
        }
        let mut entries: Vec<Vec<Field>> = (0..=order).map(|_| Vec::new()).collect();
        for (b, base) in z_chain.iter().enumerate() {
            let mut r_chain: Vec<Field> = vec![base.clone()];
            for a in 1..=(order - b) {
                let next = if a % 2 == 0 { grid.d_rr(&r_chain[a - 2])? } else { grid.d_r(&r_chain[a - 1])? };
                r_chain.push(next);
            }
            for (a, f) in r_chain.into_iter().enumerate() {
                entries[a].push(f);
                debug_assert_eq!(entries[a].len(), b + 1);
            }
        }
        Ok(DerivTable { entries })
    }

    pub fn get(&self, a: usize, b: usize) -> &Field {
        &self.entries[a][b]
    }

    pub fn order(&self) -> usize {
        self.entries.len() - 1
    }

    /// `||w||_{H~k}^2`.
    pub fn htilde_sq(&self, grid: &Grid, k: usize) -> f64 {
        let mut s = 0.0;
        for j in 0..=k {
            for a in 0..=j {
                s += r_sq(grid, self.get(a, j - a));
            }
        }
        s
    }

    /// `||D w||_{H~k}^2`; needs a table of order `k + 1`.
    pub fn d_htilde_sq(&self, grid: &Grid, k: usize) -> f64 {
        let mut s = 0.0;
        for j in 0..=k {
            for a in 0..=j {
                let b = j - a;
                s += r_sq(grid, self.get(a + 1, b)) + r_sq(grid, self.get(a, b + 1));
            }
        }
        s
    }
}

/// `sum over fields of ||w||_{H~k}^2` for `k <= 3`.
pub fn htilde_sq(grid: &Grid, fields: &[&Field], k: usize) -> Result<f64> {
    if k > 3 {
        return Err(Error::InvalidParams(format!("H~k order k <= 3 (got {k})")));
    }
    let mut s = 0.0;
    for f in fields {
        s += DerivTable::new(grid, f, k)?.htilde_sq(grid, k);
    }
    Ok(s)
}

/// One time sample of every weighted norm and energy functional.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `||sqrt(rho_bar r) v||^2 + ||sqrt(rho_bar^(gamma-2) r) phi||^2`
    pub e_l2: f64,
    /// `||v_r/sqrt r||^2 + ||v_theta/sqrt r||^2 + ||sqrt r Dv||^2 + ||sqrt r div v||^2`
    pub d_l2: f64,
    /// `||sqrt r Dv||^2 + ||sqrt r div v||^2`
    pub e_grad: f64,
    /// `||sqrt(rho_bar r) d_t v||^2 + ||sqrt(r rho_bar^(gamma-2)) d_t phi||^2`
    pub d_time: f64,
    /// energies of `d_z^j (phi, v)`, `j = 1, 2`
    pub e_z: [f64; 2],
    /// dissipation lists of `d_z^j v`, `j = 1, 2`
    pub d_z: [f64; 2],
    /// `||sqrt r D d_t v||^2 + ||sqrt r div d_t v||^2`
    pub e_td: f64,
    /// `||sqrt(rho_bar r) d_t^2 v||^2 + ||sqrt(r rho_bar^(gamma-2)) d_t^2 phi||^2`
    pub d_tt: Option<f64>,
    /// `||sqrt r d_r p||^2 + ||sqrt r d_r d_z p||^2 + ||sqrt r d_r^2 p||^2`, `p = rho_bar^(gamma-2) phi`
    pub e_press: f64,
    /// higher-order dissipation list paired with `e_press`
    pub d_press: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: Option<f64>,
    /// `||rho_bar^(gamma-2) phi||_{H~2}^2`
    pub phi_h2: f64,
    /// `||v||_{H~3}^2`
    pub v_h3: f64,
    /// `||d_t v||_{H~1}^2`
    pub dt_v_h1: f64,
    /// `||d_t phi||_{H~1}^2`
    pub dt_phi_h1: f64,
    /// instantaneous part of N(t)
    pub n_inst: f64,
    /// integrand of N(t) excluding the second-time-derivative terms
    pub n_rate: f64,
    /// `||sqrt r d_t^2 phi||^2 + ||sqrt r d_t^2 v||^2`
    pub n_rate_tt: Option<f64>,
    /// `||D p||_{H~1}^2 + ||D v||_{H~3}^2`
    pub thm_rate: f64,
}

impl EnergyReport {
    pub const COLUMNS: [&'static str; 23] = [
        "e_l2", "d_l2", "e_grad", "d_time", "e_z1", "e_z2", "d_z1", "d_z2", "e_td", "d_tt", "e_press",
        "d_press", "a1", "a2", "a3", "phi_h2", "v_h3", "dt_v_h1", "dt_phi_h1", "n_inst", "n_rate",
        "n_rate_tt", "thm_rate",
    ];

    pub fn values(&self) -> Vec<Option<f64>> {
        vec![
            Some(self.e_l2),
            Some(self.d_l2),
            Some(self.e_grad),
            Some(self.d_time),
            Some(self.e_z[0]),
            Some(self.e_z[1]),
            Some(self.d_z[0]),
            Some(self.d_z[1]),
            Some(self.e_td),
            self.d_tt,
            Some(self.e_press),
            Some(self.d_press),
            Some(self.a1),
            Some(self.a2),
            self.a3,
            Some(self.phi_h2),
            Some(self.v_h3),
            Some(self.dt_v_h1),
            Some(self.dt_phi_h1),
            Some(self.n_inst),
            Some(self.n_rate),
            self.n_rate_tt,
            Some(self.thm_rate),
        ]
    }

    pub fn from_values(v: &[Option<f64>]) -> Option<EnergyReport> {
        if v.len() != 23 {
            return None;
        }
        Some(EnergyReport {
            e_l2: v[0]?,
            d_l2: v[1]?,
            e_grad: v[2]?,
            d_time: v[3]?,
            e_z: [v[4]?, v[5]?],
            d_z: [v[6]?, v[7]?],
            e_td: v[8]?,
            d_tt: v[9],
            e_press: v[10]?,
            d_press: v[11]?,
            a1: v[12]?,
            a2: v[13]?,
            a3: v[14],
            phi_h2: v[15]?,
            v_h3: v[16]?,
            dt_v_h1: v[17]?,
            dt_phi_h1: v[18]?,
            n_inst: v[19]?,
            n_rate: v[20]?,
            n_rate_tt: v[21],
            thm_rate: v[22]?,
        })
    }
}

/// Second-time-derivative fields reconstructed from sample history.
#[derive(Debug, Clone)]
pub struct TimeDerivs {
    /// `d_t` of the tendency, i.e. `d_t^2 (phi, v)`.
    pub dt_tendency: State,
    pub dt_f: Field,
    pub dt_g: [Field; 3],
}

/// Radial weight profiles used throughout.
struct Weights {
    inv_r: Vec<f64>,
    rho_r: Vec<f64>,
    gm2_r: Vec<f64>,
}

impl Weights {
    fn new(grid: &Grid, bg: &BackgroundField) -> Weights {
        let r = &grid.r_nodes;
        Weights {
            inv_r: r.iter().map(|x| 1.0 / x).collect(),
            rho_r: r.iter().zip(&bg.rho_bar).map(|(x, d)| x * d).collect(),
            gm2_r: r.iter().zip(&bg.rho_bar_gm2).map(|(x, d)| x * d).collect(),
        }
    }
}

/// Energy and dissipation list of `d_z^j (phi, v)`:
/// `(||sqrt(rho_bar r) w||^2 + ||sqrt(rho_bar^(gamma-2) r) psi||^2,
///   ||w_r/sqrt r||^2 + ||w_theta/sqrt r||^2 + ||sqrt r d_r w||^2 + ||sqrt r d_z w||^2
///   + ||sqrt r ((1/r) d_r(r w_r) + d_z w_z)||^2)`.
fn z_level(grid: &Grid, w: &Weights, t_phi: &DerivTable, tv: &[DerivTable; 3], j: usize) -> (f64, f64) {
    let mut energy = radial_weighted_sq(grid, t_phi.get(0, j), &w.gm2_r);
    let mut diss = 0.0;
    for (c, t) in tv.iter().enumerate() {
        energy += radial_weighted_sq(grid, t.get(0, j), &w.rho_r);
        if c != 2 {
            diss += radial_weighted_sq(grid, t.get(0, j), &w.inv_r);
        }
        diss += r_sq(grid, t.get(1, j)) + r_sq(grid, t.get(0, j + 1));
    }
    let div = tv[0]
        .get(1, j)
        .zip_with(tv[2].get(0, j + 1), |i, jj, a, b| a + tv[0].get(0, j).get(i, jj) * w.inv_r[i] + b)
        .expect("same grid");
    diss += r_sq(grid, &div);
    (energy, diss)
}

fn vec_inner(grid: &Grid, a: &[Field; 3], b: [&Field; 3], weight: &[f64]) -> f64 {
    (0..3).map(|c| inner_weighted(grid, &a[c], b[c], weight)).sum()
}

/// Assemble every weighted quantity at one sample.
pub fn energy_report(
    grid: &Grid,
    bg: &BackgroundField,
    state: &State,
    parts: &RhsParts,
    history: Option<&TimeDerivs>,
) -> Result<EnergyReport> {
    let w = Weights::new(grid, bg);
    let tend = &parts.tendency;

    let t_phi = DerivTable::new(grid, &state.phi, 3)?;
    let tv = [
        DerivTable::new(grid, &state.v_r, 4)?,
        DerivTable::new(grid, &state.v_theta, 4)?,
        DerivTable::new(grid, &state.v_z, 4)?,
    ];
    let p = state.phi.map_indexed(|i, _, v| bg.rho_bar_gm2[i] * v);
    let tp = DerivTable::new(grid, &p, 3)?;
    let tf = [
        DerivTable::new(grid, &tend.v_r, 2)?,
        DerivTable::new(grid, &tend.v_theta, 2)?,
        DerivTable::new(grid, &tend.v_z, 2)?,
    ];
    let tf_phi = DerivTable::new(grid, &tend.phi, 1)?;

    let (e_l2, d_l2) = z_level(grid, &w, &t_phi, &tv, 0);
    let (e_z1, d_z1) = z_level(grid, &w, &t_phi, &tv, 1);
    let (e_z2, d_z2) = z_level(grid, &w, &t_phi, &tv, 2);

    let div = grid.cyl_div(&state.v_r, &state.v_z)?;
    let div_sq = r_sq(grid, &div);
    let dv_sq: f64 = tv.iter().map(|t| r_sq(grid, t.get(1, 0)) + r_sq(grid, t.get(0, 1))).sum();
    let e_grad = dv_sq + div_sq;

    let d_time = radial_weighted_sq(grid, &tend.phi, &w.gm2_r)
        + tend.velocity().iter().map(|f| radial_weighted_sq(grid, f, &w.rho_r)).sum::<f64>();

    let div_t = grid.cyl_div(&tend.v_r, &tend.v_z)?;
    let e_td = tf.iter().map(|t| r_sq(grid, t.get(1, 0)) + r_sq(grid, t.get(0, 1))).sum::<f64>()
        + r_sq(grid, &div_t);

    let e_press = r_sq(grid, tp.get(1, 0)) + r_sq(grid, tp.get(1, 1)) + r_sq(grid, tp.get(2, 0));
    let d_press = r_sq(grid, tp.get(1, 0))
        + r_sq(grid, tv[0].get(2, 0))
        + r_sq(grid, tp.get(1, 1))
        + r_sq(grid, tv[0].get(2, 1))
        + r_sq(grid, tp.get(2, 0));

    let a1 = vec_inner(grid, &parts.g, state.velocity(), &w.rho_r).abs()
        + inner_weighted(grid, &parts.f, &state.phi, &w.gm2_r).abs();
    let a2 = vec_inner(grid, &parts.g, tend.velocity(), &w.rho_r).abs()
        + inner_weighted(grid, &parts.f, &tend.phi, &w.gm2_r).abs();

    let phi_h2 = tp.htilde_sq(grid, 2);
    let v_h3: f64 = tv.iter().map(|t| t.htilde_sq(grid, 3)).sum();
    let dt_v_h1: f64 = tf.iter().map(|t| t.htilde_sq(grid, 1)).sum();
    let dt_v_h2: f64 = tf.iter().map(|t| t.htilde_sq(grid, 2)).sum();
    let dt_phi_h1 = tf_phi.htilde_sq(grid, 1);
    let dv_h3: f64 = tv.iter().map(|t| t.d_htilde_sq(grid, 3)).sum();
    let dp_h1 = tp.d_htilde_sq(grid, 1);

    let swirl_decay = radial_weighted_sq(grid, &state.v_r, &w.inv_r)
        + radial_weighted_sq(grid, &state.v_theta, &w.inv_r);
    let n_inst = v_h3 + dt_v_h1 + phi_h2 + dt_phi_h1;
    let n_rate = swirl_decay + dv_h3 + dt_v_h2 + dt_phi_h1 + dp_h1;
    let thm_rate = dp_h1 + dv_h3;

    let (d_tt, a3, n_rate_tt) = match history {
        None => (None, None, None),
        Some(h) => {
            let tt = &h.dt_tendency;
            let d_tt = radial_weighted_sq(grid, &tt.phi, &w.gm2_r)
                + tt.velocity().iter().map(|f| radial_weighted_sq(grid, f, &w.rho_r)).sum::<f64>();
            let a3 = vec_inner(grid, &h.dt_g, tend.velocity(), &w.rho_r).abs()
                + inner_weighted(grid, &h.dt_f, &tend.phi, &w.gm2_r).abs()
                + vec_inner(grid, &h.dt_g, tt.velocity(), &w.rho_r).abs()
                + inner_weighted(grid, &h.dt_f, &tt.phi, &w.gm2_r).abs();
            let n_tt = tt.fields().iter().map(|f| r_sq(grid, f)).sum::<f64>();
            (Some(d_tt), Some(a3), Some(n_tt))
        }
    };

    Ok(EnergyReport {
        e_l2,
        d_l2,
        e_grad,
        d_time,
        e_z: [e_z1, e_z2],
        d_z: [d_z1, d_z2],
        e_td,
        d_tt,
        e_press,
        d_press,
        a1,
        a2,
        a3,
        phi_h2,
        v_h3,
        dt_v_h1,
        dt_phi_h1,
        n_inst,
        n_rate,
        n_rate_tt,
        thm_rate,
    })
}

/// Running trapezoid integrals `int_0^t (...) dtau`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Integrals {
    pub d_l2: f64,
    pub d_time: f64,
    pub d_tt: f64,
    pub d_z: [f64; 2],
    pub d_press: f64,
    pub a: [f64; 3],
    /// integral part of N(t)
    pub n: f64,
    /// `int (||D p||_{H~1}^2 + ||D v||_{H~3}^2)`
    pub thm: f64,
}

impl Integrals {
    pub const COLUMNS: [&'static str; 11] = [
        "int_d_l2", "int_d_time", "int_d_tt", "int_d_z1", "int_d_z2", "int_d_press", "int_a1", "int_a2",
        "int_a3", "int_n", "int_thm",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.d_l2, self.d_time, self.d_tt, self.d_z[0], self.d_z[1], self.d_press, self.a[0], self.a[1],
            self.a[2], self.n, self.thm,
        ]
    }

    pub fn from_values(v: &[f64]) -> Option<Integrals> {
        if v.len() != 11 {
            return None;
        }
        Some(Integrals {
            d_l2: v[0],
            d_time: v[1],
            d_tt: v[2],
            d_z: [v[3], v[4]],
            d_press: v[5],
            a: [v[6], v[7], v[8]],
            n: v[9],
            thm: v[10],
        })
    }

    fn advance(&self, dt: f64, prev: &EnergyReport, cur: &EnergyReport) -> Integrals {
        let trap = |a: f64, b: f64| 0.5 * dt * (a + b);
        let trap_opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => trap(a, b),
            _ => 0.0,
        };
        Integrals {
            d_l2: self.d_l2 + trap(prev.d_l2, cur.d_l2),
            d_time: self.d_time + trap(prev.d_time, cur.d_time),
            d_tt: self.d_tt + trap_opt(prev.d_tt, cur.d_tt),
            d_z: [self.d_z[0] + trap(prev.d_z[0], cur.d_z[0]), self.d_z[1] + trap(prev.d_z[1], cur.d_z[1])],
            d_press: self.d_press + trap(prev.d_press, cur.d_press),
            a: [
                self.a[0] + trap(prev.a1, cur.a1),
                self.a[1] + trap(prev.a2, cur.a2),
                self.a[2] + trap_opt(prev.a3, cur.a3),
            ],
            n: self.n + trap(prev.n_rate, cur.n_rate) + trap_opt(prev.n_rate_tt, cur.n_rate_tt),
            thm: self.thm + trap(prev.thm_rate, cur.thm_rate),
        }
    }
}

/// One row of a [`TimeSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    /// step size used to reach this sample (0 at t = 0)
    pub dt: f64,
    pub report: EnergyReport,
    pub integrals: Integrals,
    pub monitor: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    pub samples: Vec<Sample>,
    /// `||phi_0||_{H~2}^2 + ||v_0||_{H~3}^2`
    pub initial_norm_sq: f64,
    /// steps between samples
    pub cadence: usize,
}

impl TimeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn max_monitor(&self) -> f64 {
        self.samples.iter().map(|s| s.monitor).fold(0.0, f64::max)
    }
}

/// `N(t)` at every sample: instantaneous part plus integral part.
pub fn n_functional(series: &TimeSeries) -> Vec<f64> {
    series.samples.iter().map(|s| s.report.n_inst + s.integrals.n).collect()
}

/// Empirical constant of the global bound:
/// `[sup (phi_h2 + v_h3) + int (||D p||_{H~1}^2 + ||D v||_{H~3}^2)] / (||phi_0||_{H~2}^2 + ||v_0||_{H~3}^2)`.
/// `None` for zero initial data or an empty series.
pub fn theorem_ratio(series: &TimeSeries) -> Option<f64> {
    let last = series.samples.last()?;
    if !(series.initial_norm_sq > 0.0) {
        return None;
    }
    let sup = series.samples.iter().map(|s| s.report.phi_h2 + s.report.v_h3).fold(0.0, f64::max);
    Some((sup + last.integrals.thm) / series.initial_norm_sq)
}

/// `||phi_0||_{H~2}^2 + ||v_0||_{H~3}^2`.
pub fn initial_norm_sq(grid: &Grid, initial: &State) -> Result<f64> {
    Ok(htilde_sq(grid, &[&initial.phi], 2)? + htilde_sq(grid, &[&initial.v_r, &initial.v_theta, &initial.v_z], 3)?)
}

/// Largest `|component|` over the outermost `margin` radial rows (and axial
/// rows at both ends when z is not periodic).
pub fn boundary_monitor(grid: &Grid, state: &State, margin: usize) -> Result<f64> {
    let (nr, nz) = grid.shape();
    if margin == 0 || margin >= nr.min(nz) / 4 {
        return Err(Error::InvalidParams(format!(
            "monitor margin must be in 1..{} (got {margin})",
            nr.min(nz) / 4
        )));
    }
    let mut m = 0.0_f64;
    for f in state.fields() {
        for i in 0..nr {
            let outer_r = i >= nr - margin;
            for j in 0..nz {
                let ends = !grid.periodic() && (j < margin || j >= nz - margin);
                if outer_r || ends {
                    m = m.max(f.get(i, j).abs());
                }
            }
        }
    }
    Ok(m)
}

/// Pieces of the weighted L^2 energy identity for the linearized system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    /// `d/dt (1/2 ||sqrt(rho_bar r) v||^2 + (A gamma / 2) ||sqrt(rho_bar^(gamma-2) r) phi||^2)`
    pub energy_rate: f64,
    /// `nu1 (||v_r/sqrt r||^2 + ||v_theta/sqrt r||^2 + ||sqrt r Dv||^2) + nu2 ||sqrt r div v||^2`
    pub dissipation: f64,
    /// `(2 M0 v_theta / r, rho_bar v_r)`
    pub coriolis: f64,
    pub residual: f64,
}

/// Semi-discrete balance `energy_rate + dissipation - coriolis` with `f, g` dropped.
/// It vanishes for the continuous system; discretely it is truncation error.
pub fn energy_balance(grid: &Grid, bg: &BackgroundField, state: &State) -> Result<BalanceReport> {
    let p = &bg.params;
    let w = Weights::new(grid, bg);
    let tend = rhs_parts(grid, state, bg, RhsMode::Linearized)?.tendency;
    let ag = p.a * p.gamma;
    let press_w: Vec<f64> = w.gm2_r.iter().map(|x| ag * x).collect();
    let energy_rate = inner_weighted(grid, &state.phi, &tend.phi, &press_w)
        + (0..3).map(|c| inner_weighted(grid, state.velocity()[c], tend.velocity()[c], &w.rho_r)).sum::<f64>();

    let div = grid.cyl_div(&state.v_r, &state.v_z)?;
    let div_sq = r_sq(grid, &div);
    let mut grad = radial_weighted_sq(grid, &state.v_r, &w.inv_r) + radial_weighted_sq(grid, &state.v_theta, &w.inv_r);
    for v in state.velocity() {
        grad += r_sq(grid, &grid.d_r(v)?) + r_sq(grid, &grid.d_z(v)?);
    }
    let dissipation = p.nu1 * grad + p.nu2 * div_sq;
    let cor_w: Vec<f64> = (0..grid.nr()).map(|i| 2.0 * p.m0 * bg.rho_bar[i] / grid.r_nodes[i]).collect();
    let coriolis = inner_weighted(grid, &state.v_theta, &state.v_r, &cor_w);
    Ok(BalanceReport { energy_rate, dissipation, coriolis, residual: energy_rate + dissipation - coriolis })
}

/// Backward three-point derivative weights at `t2` for samples at `t0 < t1 < t2`.
pub fn backward_weights(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let h1 = t2 - t1;
    let h2 = t1 - t0;
    [h1 / (h2 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (2.0 * h1 + h2) / (h1 * (h1 + h2))]
}

struct HistoryEntry {
    t: f64,
    tendency: State,
    f: Field,
    g: [Field; 3],
}

/// Accumulates samples into a [`TimeSeries`], keeping the short history
/// needed for second time derivatives.
pub struct Tracker {
    series: TimeSeries,
    history: Vec<HistoryEntry>,
    margin: usize,
}

impl Tracker {
    pub fn new(grid: &Grid, initial: &State, cadence: usize, margin: usize) -> Result<Tracker> {
        Ok(Tracker {
            series: TimeSeries { samples: Vec::new(), initial_norm_sq: initial_norm_sq(grid, initial)?, cadence },
            history: Vec::new(),
            margin,
        })
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn into_series(self) -> TimeSeries {
        self.series
    }

    pub fn record(
        &mut self,
        grid: &Grid,
        bg: &BackgroundField,
        step: usize,
        t: f64,
        dt: f64,
        state: &State,
        parts: &RhsParts,
    ) -> Result<&Sample> {
        let derivs = if self.history.len() >= 2 {
            let (h0, h1) = (&self.history[0], &self.history[1]);
            let [c0, c1, c2] = backward_weights(h0.t, h1.t, t);
            let comb = |a: &Field, b: &Field, c: &Field| {
                a.scaled(c0).axpy(c1, b).axpy(c2, c)
            };
            let dt_tendency = State {
                phi: comb(&h0.tendency.phi, &h1.tendency.phi, &parts.tendency.phi),
                v_r: comb(&h0.tendency.v_r, &h1.tendency.v_r, &parts.tendency.v_r),
                v_theta: comb(&h0.tendency.v_theta, &h1.tendency.v_theta, &parts.tendency.v_theta),
                v_z: comb(&h0.tendency.v_z, &h1.tendency.v_z, &parts.tendency.v_z),
            };
            Some(TimeDerivs {
                dt_tendency,
                dt_f: comb(&h0.f, &h1.f, &parts.f),
                dt_g: [
                    comb(&h0.g[0], &h1.g[0], &parts.g[0]),
                    comb(&h0.g[1], &h1.g[1], &parts.g[1]),
                    comb(&h0.g[2], &h1.g[2], &parts.g[2]),
                ],
            })
        } else {
            None
        };
        let report = energy_report(grid, bg, state, parts, derivs.as_ref())?;
        let integrals = match self.series.samples.last() {
            None => Integrals::default(),
            Some(prev) => prev.integrals.advance(t - prev.t, &prev.report, &report),
        };
        let monitor = boundary_monitor(grid, state, self.margin)?;
        self.series.samples.push(Sample { step, t, dt, report, integrals, monitor });

        self.history.push(HistoryEntry { t, tendency: parts.tendency.clone(), f: parts.f.clone(), g: parts.g.clone() });
        if self.history.len() > 2 {
            self.history.remove(0);
        }
        Ok(self.series.samples.last().expect("just pushed"))
    }
}
