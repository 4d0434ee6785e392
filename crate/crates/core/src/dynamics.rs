//! Right-hand sides of the perturbation system for `(phi, v) = (rho - rho_bar, u - u_bar)`
//! and of the primitive axisymmetric Navier-Stokes system, plus initial data.
//!
//! Boundary treatment: `v` is Dirichlet zero on the wall `r = 1`, on the
//! outer radius and (when not periodic) on the axial ends. `phi` is evolved
//! everywhere by the continuity equation with one-sided radial stencils at
//! the boundary rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{pow_short, BackgroundField, FlowParams};
use crate::error::{Error, Result};
use crate::operators::{Field, Grid};

/// Eight-point Gauss-Legendre rule on `[0, 1]`: `(node, weight)`.
pub const GAUSS8: [(f64, f64); 8] = {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    [
        ((1.0 - X[3]) * 0.5, W[3] * 0.5),
        ((1.0 - X[2]) * 0.5, W[2] * 0.5),
        ((1.0 - X[1]) * 0.5, W[1] * 0.5),
        ((1.0 - X[0]) * 0.5, W[0] * 0.5),
        ((1.0 + X[0]) * 0.5, W[0] * 0.5),
        ((1.0 + X[1]) * 0.5, W[1] * 0.5),
        ((1.0 + X[2]) * 0.5, W[2] * 0.5),
        ((1.0 + X[3]) * 0.5, W[3] * 0.5),
    ]
};

/// Perturbation unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub phi: Field,
    pub v_r: Field,
    pub v_theta: Field,
    pub v_z: Field,
}

/// Time derivatives of the four perturbation fields.
pub type Tendency = State;

impl State {
    pub fn zeros(grid: &Grid) -> State {
        let z = Field::zeros(grid);
        State { phi: z.clone(), v_r: z.clone(), v_theta: z.clone(), v_z: z }
    }

    pub fn fields(&self) -> [&Field; 4] {
        [&self.phi, &self.v_r, &self.v_theta, &self.v_z]
    }

    pub fn fields_mut(&mut self) -> [&mut Field; 4] {
        [&mut self.phi, &mut self.v_r, &mut self.v_theta, &mut self.v_z]
    }

    pub fn velocity(&self) -> [&Field; 3] {
        [&self.v_r, &self.v_theta, &self.v_z]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.phi.shape()
    }

    /// `self + s * other`, field by field.
    pub fn axpy(&self, s: f64, other: &State) -> State {
        State {
            phi: self.phi.axpy(s, &other.phi),
            v_r: self.v_r.axpy(s, &other.v_r),
            v_theta: self.v_theta.axpy(s, &other.v_theta),
            v_z: self.v_z.axpy(s, &other.v_z),
        }
    }

    pub fn scaled(&self, s: f64) -> State {
        State {
            phi: self.phi.scaled(s),
            v_r: self.v_r.scaled(s),
            v_theta: self.v_theta.scaled(s),
            v_z: self.v_z.scaled(s),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.fields().iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.fields().iter().all(|f| f.is_zero())
    }

    /// Bitwise equality of all four fields.
    pub fn bits_eq(&self, other: &State) -> bool {
        self.fields()
            .iter()
            .zip(other.fields())
            .all(|(a, b)| a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()))
    }

    /// Zero velocity on every Dirichlet boundary node.
    pub fn enforce_velocity_bc(&mut self, grid: &Grid) {
        for f in [&mut self.v_r, &mut self.v_theta, &mut self.v_z] {
            zero_dirichlet(grid, f);
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        self.phi.check_finite("phi")?;
        self.v_r.check_finite("v_r")?;
        self.v_theta.check_finite("v_theta")?;
        self.v_z.check_finite("v_z")
    }

    /// `rho_bar + phi > 0` at every node.
    pub fn check_positivity(&self, bg: &BackgroundField) -> Result<()> {
        let (nr, nz) = self.shape();
        for i in 0..nr {
            let row = self.phi.row(i);
            for (j, p) in row.iter().enumerate() {
                let total = bg.rho_bar[i] + p;
                if !(total > 0.0) {
                    return Err(Error::Positivity { i, j, value: total });
                }
            }
        }
        let _ = nz;
        Ok(())
    }
}

fn zero_dirichlet(grid: &Grid, f: &mut Field) {
    let (nr, nz) = grid.shape();
    for j in 0..nz {
        f.set(0, j, 0.0);
        f.set(nr - 1, j, 0.0);
    }
    if !grid.periodic() {
        for i in 0..nr {
            f.set(i, 0, 0.0);
            f.set(i, nz - 1, 0.0);
        }
    }
}

/// Whether the quadratic terms `f`, `g` are included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsMode {
    #[default]
    Full,
    Linearized,
}

/// The remainder as printed below the perturbation system:
/// `gamma (gamma - 2) / 2 * phi^2 * int_0^1 (rho_bar + s phi)^(gamma - 3) s ds`.
///
/// This is not the Taylor remainder of the enthalpy (its leading term is half
/// of it); the evolution uses [`pressure_remainder`].
pub fn q_printed(rho_bar: f64, phi: f64, gamma: f64) -> Result<f64> {
    if gamma == 2.0 || phi == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (s, w) in GAUSS8 {
        let base = rho_bar + s * phi;
        if !(base > 0.0) {
            return Err(Error::Positivity { i: 0, j: 0, value: base });
        }
        acc += w * s * pow_short(base, gamma - 3.0);
    }
    Ok(0.5 * gamma * (gamma - 2.0) * phi * phi * acc)
}

/// Exact quadratic remainder of the pressure term,
/// `h(rho_bar + phi) - h(rho_bar) - h'(rho_bar) phi` with enthalpy
/// `h(rho) = A gamma / (gamma - 1) rho^(gamma - 1)`, written as
/// `A gamma (gamma - 2) phi^2 int_0^1 (1 - s) (rho_bar + s phi)^(gamma - 3) ds`.
pub fn pressure_remainder(rho_bar: f64, phi: f64, a: f64, gamma: f64) -> Result<f64> {
    if gamma == 2.0 || phi == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (s, w) in GAUSS8 {
        let base = rho_bar + s * phi;
        if !(base > 0.0) {
            return Err(Error::Positivity { i: 0, j: 0, value: base });
        }
        acc += w * (1.0 - s) * pow_short(base, gamma - 3.0);
    }
    Ok(a * gamma * (gamma - 2.0) * phi * phi * acc)
}

fn pointwise_q<F>(phi: &Field, bg: &BackgroundField, f: F) -> Result<Field>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let (nr, nz) = phi.shape();
    let rows: Vec<Result<Vec<f64>>> = (0..nr)
        .into_par_iter()
        .map(|i| {
            let rho = bg.rho_bar[i];
            phi.row(i)
                .iter()
                .enumerate()
                .map(|(j, &p)| {
                    f(rho, p).map_err(|_| Error::Positivity { i, j, value: rho + p })
                })
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(nr * nz);
    for row in rows {
        data.extend(row?);
    }
    Field::from_vec(nr, nz, data)
}

/// Field version of [`q_printed`].
pub fn q_term(phi: &Field, bg: &BackgroundField, gamma: f64) -> Result<Field> {
    pointwise_q(phi, bg, |rho, p| q_printed(rho, p, gamma))
}

/// Field version of [`pressure_remainder`].
pub fn pressure_remainder_field(phi: &Field, bg: &BackgroundField) -> Result<Field> {
    let (a, gamma) = (bg.params.a, bg.params.gamma);
    pointwise_q(phi, bg, |rho, p| pressure_remainder(rho, p, a, gamma))
}

/// `f = -(1/r) d_r(r phi v_r) - d_z(phi v_z)`.
pub fn nonlinear_f(grid: &Grid, state: &State) -> Result<Field> {
    let fr = state.phi.zip_with(&state.v_r, |_, _, a, b| a * b)?;
    let fz = state.phi.zip_with(&state.v_z, |_, _, a, b| a * b)?;
    Ok(grid.cyl_div(&fr, &fz)?.scaled(-1.0))
}

/// Derivatives shared by `g` and the linear part of the right-hand side.
struct Derivs {
    dr_vr: Field,
    dz_vr: Field,
    dr_vt: Field,
    dz_vt: Field,
    dr_vz: Field,
    dz_vz: Field,
    lap_r: Field,
    lap_t: Field,
    lap_z: Field,
    dr_div: Field,
    dz_div: Field,
}

impl Derivs {
    fn new(grid: &Grid, s: &State) -> Result<Derivs> {
        let div = grid.cyl_div(&s.v_r, &s.v_z)?;
        Ok(Derivs {
            dr_vr: grid.d_r(&s.v_r)?,
            dz_vr: grid.d_z(&s.v_r)?,
            dr_vt: grid.d_r(&s.v_theta)?,
            dz_vt: grid.d_z(&s.v_theta)?,
            dr_vz: grid.d_r(&s.v_z)?,
            dz_vz: grid.d_z(&s.v_z)?,
            lap_r: grid.visc_swirl(&s.v_r)?,
            lap_t: grid.visc_swirl(&s.v_theta)?,
            lap_z: grid.visc_axial(&s.v_z)?,
            dr_div: grid.d_r(&div)?,
            dz_div: grid.d_z(&div)?,
        })
    }
}

fn g_terms(grid: &Grid, s: &State, bg: &BackgroundField, d: &Derivs) -> Result<[Field; 3]> {
    let p = &bg.params;
    let q = pressure_remainder_field(&s.phi, bg)?;
    let dr_q = grid.d_r(&q)?;
    let dz_q = grid.d_z(&q)?;
    let coef = |i: usize, j: usize| {
        let phi = s.phi.get(i, j);
        let rho = bg.rho_bar[i];
        phi / ((phi + rho) * rho)
    };
    let g1 = Field::zeros(grid).map_indexed(|i, j, _| {
        let r = grid.r_nodes[i];
        let (vr, vt, vz) = (s.v_r.get(i, j), s.v_theta.get(i, j), s.v_z.get(i, j));
        vt * vt / r - vr * d.dr_vr.get(i, j) - vz * d.dz_vr.get(i, j) - dr_q.get(i, j)
            - coef(i, j) * (p.nu1 * d.lap_r.get(i, j) + p.nu2 * d.dr_div.get(i, j))
    });
    let g2 = Field::zeros(grid).map_indexed(|i, j, _| {
        let r = grid.r_nodes[i];
        let (vr, vt, vz) = (s.v_r.get(i, j), s.v_theta.get(i, j), s.v_z.get(i, j));
        -vr * d.dr_vt.get(i, j) - vz * d.dz_vt.get(i, j) - vt * vr / r - coef(i, j) * p.nu1 * d.lap_t.get(i, j)
    });
    // the nu1 bracket is the scalar Laplacian of v_z (d_r v_z / r, not d_r v_r / r)
    let g3 = Field::zeros(grid).map_indexed(|i, j, _| {
        let (vr, vz) = (s.v_r.get(i, j), s.v_z.get(i, j));
        -vr * d.dr_vz.get(i, j) - vz * d.dz_vz.get(i, j) - dz_q.get(i, j)
            - coef(i, j) * (p.nu1 * d.lap_z.get(i, j) + p.nu2 * d.dz_div.get(i, j))
    });
    Ok([g1, g2, g3])
}

/// `(g1, g2, g3)`: all quadratic-and-higher terms of the momentum equations.
pub fn nonlinear_g(grid: &Grid, state: &State, bg: &BackgroundField) -> Result<[Field; 3]> {
    state.check_positivity(bg)?;
    let d = Derivs::new(grid, state)?;
    g_terms(grid, state, bg, &d)
}

/// One evaluation of the perturbation right-hand side with its nonlinear
/// pieces kept for diagnostics.
#[derive(Debug, Clone)]
pub struct RhsParts {
    pub tendency: Tendency,
    pub f: Field,
    pub g: [Field; 3],
}

pub fn rhs_parts(grid: &Grid, state: &State, bg: &BackgroundField, mode: RhsMode) -> Result<RhsParts> {
    state.check_positivity(bg)?;
    let p = &bg.params;
    let d = Derivs::new(grid, state)?;
    let (f, g) = match mode {
        RhsMode::Full => (nonlinear_f(grid, state)?, g_terms(grid, state, bg, &d)?),
        RhsMode::Linearized => {
            let z = Field::zeros(grid);
            (z.clone(), [z.clone(), z.clone(), z])
        }
    };

    let mr = state.v_r.map_indexed(|i, _, v| bg.rho_bar[i] * v);
    let mz = state.v_z.map_indexed(|i, _, v| bg.rho_bar[i] * v);
    let mass = grid.cyl_div(&mr, &mz)?;
    let dphi = mass.zip_with(&f, |_, _, m, fv| -m + fv)?;

    let pert_p = state.phi.map_indexed(|i, _, v| bg.rho_bar_gm2[i] * v);
    let dr_p = grid.d_r(&pert_p)?;
    let dz_p = grid.d_z(&pert_p)?;
    let ag = p.a * p.gamma;

    let mut dv_r = Field::zeros(grid).map_indexed(|i, j, _| {
        let r = grid.r_nodes[i];
        let inv_rho = 1.0 / bg.rho_bar[i];
        2.0 * p.m0 / (r * r) * state.v_theta.get(i, j) - ag * dr_p.get(i, j)
            + inv_rho * (p.nu1 * d.lap_r.get(i, j) + p.nu2 * d.dr_div.get(i, j))
            + g[0].get(i, j)
    });
    let mut dv_t = Field::zeros(grid)
        .map_indexed(|i, j, _| p.nu1 / bg.rho_bar[i] * d.lap_t.get(i, j) + g[1].get(i, j));
    let mut dv_z = Field::zeros(grid).map_indexed(|i, j, _| {
        let inv_rho = 1.0 / bg.rho_bar[i];
        -ag * dz_p.get(i, j) + inv_rho * (p.nu1 * d.lap_z.get(i, j) + p.nu2 * d.dz_div.get(i, j))
            + g[2].get(i, j)
    });
    for fld in [&mut dv_r, &mut dv_t, &mut dv_z] {
        zero_dirichlet(grid, fld);
    }

    let tendency = State { phi: dphi, v_r: dv_r, v_theta: dv_t, v_z: dv_z };
    tendency.check_finite()?;
    Ok(RhsParts { tendency, f, g })
}

pub fn rhs_perturbation(grid: &Grid, state: &State, bg: &BackgroundField) -> Result<Tendency> {
    Ok(rhs_parts(grid, state, bg, RhsMode::Full)?.tendency)
}

/// The perturbation right-hand side with `f` and `g` dropped.
pub fn rhs_linearized(grid: &Grid, state: &State, bg: &BackgroundField) -> Result<Tendency> {
    Ok(rhs_parts(grid, state, bg, RhsMode::Linearized)?.tendency)
}

/// Time derivatives `(rho, u_r, u_theta, u_z)` of the primitive system, the
/// momentum equations divided by `rho`. Velocity tendencies are zero on the
/// Dirichlet boundaries, as in the perturbation form.
pub fn rhs_primitive(
    grid: &Grid,
    rho: &Field,
    u_r: &Field,
    u_theta: &Field,
    u_z: &Field,
    params: &FlowParams,
) -> Result<[Field; 4]> {
    for (k, v) in rho.data.iter().enumerate() {
        if !(*v > 0.0) {
            let nz = grid.nz();
            return Err(Error::Positivity { i: k / nz, j: k % nz, value: *v });
        }
    }
    let mr = rho.zip_with(u_r, |_, _, a, b| a * b)?;
    let mz = rho.zip_with(u_z, |_, _, a, b| a * b)?;
    let drho = grid.cyl_div(&mr, &mz)?.scaled(-1.0);

    let pressure = rho.map_indexed(|_, _, v| params.a * pow_short(v, params.gamma));
    let dr_p = grid.d_r(&pressure)?;
    let dz_p = grid.d_z(&pressure)?;
    let div = grid.cyl_div(u_r, u_z)?;
    let dr_div = grid.d_r(&div)?;
    let dz_div = grid.d_z(&div)?;
    let (dr_ur, dz_ur) = (grid.d_r(u_r)?, grid.d_z(u_r)?);
    let (dr_ut, dz_ut) = (grid.d_r(u_theta)?, grid.d_z(u_theta)?);
    let (dr_uz, dz_uz) = (grid.d_r(u_z)?, grid.d_z(u_z)?);
    let lap_r = grid.visc_swirl(u_r)?;
    let lap_t = grid.visc_swirl(u_theta)?;
    let lap_z = grid.visc_axial(u_z)?;
    let (nu1, nu2) = (params.nu1, params.nu2);

    let mut dur = Field::zeros(grid).map_indexed(|i, j, _| {
        let r = grid.r_nodes[i];
        let inv = 1.0 / rho.get(i, j);
        let (a, t, c) = (u_r.get(i, j), u_theta.get(i, j), u_z.get(i, j));
        -(a * dr_ur.get(i, j) + c * dz_ur.get(i, j) - t * t / r) - inv * dr_p.get(i, j)
            + inv * (nu1 * lap_r.get(i, j) + nu2 * dr_div.get(i, j))
    });
    let mut dut = Field::zeros(grid).map_indexed(|i, j, _| {
        let r = grid.r_nodes[i];
        let inv = 1.0 / rho.get(i, j);
        let (a, t, c) = (u_r.get(i, j), u_theta.get(i, j), u_z.get(i, j));
        -(a * dr_ut.get(i, j) + c * dz_ut.get(i, j) + t * a / r) + inv * nu1 * lap_t.get(i, j)
    });
    let mut duz = Field::zeros(grid).map_indexed(|i, j, _| {
        let inv = 1.0 / rho.get(i, j);
        let (a, c) = (u_r.get(i, j), u_z.get(i, j));
        -(a * dr_uz.get(i, j) + c * dz_uz.get(i, j)) - inv * dz_p.get(i, j)
            + inv * (nu1 * lap_z.get(i, j) + nu2 * dz_div.get(i, j))
    });
    for fld in [&mut dur, &mut dut, &mut duz] {
        zero_dirichlet(grid, fld);
    }
    Ok([drho, dur, dut, duz])
}

/// Which perturbation components an initial bump populates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComponentMask {
    pub phi: bool,
    pub v_r: bool,
    pub v_theta: bool,
    pub v_z: bool,
}

impl Default for ComponentMask {
    fn default() -> Self {
        ComponentMask { phi: true, v_r: true, v_theta: true, v_z: true }
    }
}

impl ComponentMask {
    pub fn as_array(&self) -> [bool; 4] {
        [self.phi, self.v_r, self.v_theta, self.v_z]
    }
}

/// Compactly supported Gaussian bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bump {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub widths: [f64; 2],
    pub mask: ComponentMask,
}

impl Default for Bump {
    fn default() -> Self {
        Bump { amplitude: 1e-3, center: [6.0, 0.0], widths: [1.0, 1.0], mask: ComponentMask::default() }
    }
}

/// Cutoff radius in units of the bump widths.
pub const BUMP_SUPPORT: f64 = 5.0;

impl Bump {
    pub fn with_amplitude(self, amplitude: f64) -> Bump {
        Bump { amplitude, ..self }
    }

    /// Profile value at `(r, z)`: `eps * exp(-x^2 - y^2) * (1 - rho^2)^4` with
    /// `rho^2 = (x^2 + y^2) / 25`, zero outside.
    pub fn profile(&self, r: f64, z: f64) -> f64 {
        let x = (r - self.center[0]) / self.widths[0];
        let y = (z - self.center[1]) / self.widths[1];
        let q = x * x + y * y;
        let s = q / (BUMP_SUPPORT * BUMP_SUPPORT);
        if s >= 1.0 {
            return 0.0;
        }
        let c = 1.0 - s;
        let c2 = c * c;
        self.amplitude * (-q).exp() * c2 * c2
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let spec = &grid.spec;
        let [r0, z0] = self.center;
        let [sr, sz] = self.widths;
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InitialCondition(format!("amplitude >= 0 (got {})", self.amplitude)));
        }
        if !(sr > 0.0 && sz > 0.0) {
            return Err(Error::InitialCondition("bump widths must be positive".into()));
        }
        let (lo_r, hi_r) = (r0 - BUMP_SUPPORT * sr, r0 + BUMP_SUPPORT * sr);
        let (lo_z, hi_z) = (z0 - BUMP_SUPPORT * sz, z0 + BUMP_SUPPORT * sz);
        if lo_r < 1.0 || hi_r > spec.r_max || lo_z < spec.z_min || hi_z > spec.z_max {
            return Err(Error::InitialCondition(format!(
                "bump support [{lo_r}, {hi_r}] x [{lo_z}, {hi_z}] leaves the domain [1, {}] x [{}, {}]",
                spec.r_max, spec.z_min, spec.z_max
            )));
        }
        Ok(())
    }
}

pub fn make_bump_ic(grid: &Grid, bump: &Bump) -> Result<State> {
    bump.validate(grid)?;
    let shape = Field::from_fn(grid, |r, z| bump.profile(r, z));
    let zero = Field::zeros(grid);
    let pick = |on: bool| if on { shape.clone() } else { zero.clone() };
    let m = bump.mask;
    let mut s = State { phi: pick(m.phi), v_r: pick(m.v_r), v_theta: pick(m.v_theta), v_z: pick(m.v_z) };
    s.enforce_velocity_bc(grid);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::build_background;
    use crate::operators::{GridSpec, ZBoundary};

    #[test]
    fn gauss_rule_integrates_degree_15() {
        let s: f64 = GAUSS8.iter().map(|(x, w)| w * x.powi(15)).sum();
        assert!((s - 1.0 / 16.0).abs() < 1e-15);
        let s: f64 = GAUSS8.iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_hand_values() {
        assert_eq!(q_printed(1.3, 0.4, 2.0).unwrap(), 0.0);
        assert!((q_printed(1.0, 0.2, 3.0).unwrap() - 0.03).abs() < 1e-15);
        let want = 4.0 * 0.01 * (1.0 + 0.1 / 3.0);
        assert!((q_printed(2.0, 0.1, 4.0).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn q_sign_follows_gamma_minus_two() {
        for g in [1.2, 1.4, 1.9, 2.5, 3.0, 4.2] {
            for phi in [-0.3, -1e-3, 1e-3, 0.5] {
                let q = q_printed(1.0, phi, g).unwrap();
                let rem = pressure_remainder(1.0, phi, 1.0, g).unwrap();
                assert_eq!(q.signum(), (g - 2.0_f64).signum());
                assert_eq!(rem.signum(), (g - 2.0_f64).signum());
            }
        }
    }

    #[test]
    fn remainder_matches_enthalpy_difference() {
        // oracle: direct evaluation of h(rho+phi) - h(rho) - h'(rho) phi
        for (a, g, rho, phi) in [(1.0, 1.4, 1.1, 0.05), (2.0, 3.5, 0.7, -0.2), (0.5, 1.67, 2.0, 0.3)] {
            let h = |x: f64| a * g / (g - 1.0) * x.powf(g - 1.0);
            let oracle = h(rho + phi) - h(rho) - a * g * rho.powf(g - 2.0) * phi;
            let rem = pressure_remainder(rho, phi, a, g).unwrap();
            assert!(((rem - oracle) / oracle).abs() < 1e-10, "{rem} vs {oracle}");
        }
    }

    #[test]
    fn printed_q_is_half_the_remainder_for_small_phi() {
        let rem = pressure_remainder(1.3, 1e-6, 1.0, 1.4).unwrap();
        let q = q_printed(1.3, 1e-6, 1.4).unwrap();
        assert!((q / rem - 0.5).abs() < 1e-5);
    }

    #[test]
    fn q_rejects_vacuum() {
        assert!(matches!(q_printed(1.0, -1.5, 1.4), Err(Error::Positivity { .. })));
        assert!(pressure_remainder(1.0, -1.5, 1.0, 1.4).is_err());
    }

    fn small_grid() -> Grid {
        Grid::new(GridSpec {
            n_r: 24,
            n_z: 20,
            r_max: 8.0,
            z_min: -4.0,
            z_max: 4.0,
            beta: 0.5,
            z_boundary: ZBoundary::Periodic,
        })
        .unwrap()
    }

    #[test]
    fn zero_state_gives_exactly_zero_tendency() {
        let g = small_grid();
        let bg = build_background(&g, &FlowParams::default()).unwrap();
        let parts = rhs_parts(&g, &State::zeros(&g), &bg, RhsMode::Full).unwrap();
        assert!(parts.tendency.fields().iter().all(|f| f.data.iter().all(|v| *v == 0.0)));
        assert!(parts.f.is_zero());
        assert!(parts.g.iter().all(|f| f.is_zero()));
    }

    #[test]
    fn f_vanishes_without_phi_or_velocity() {
        let g = small_grid();
        let mut s = State::zeros(&g);
        s.v_r = Field::from_fn(&g, |r, z| (r * z).sin());
        assert!(nonlinear_f(&g, &s).unwrap().is_zero());
        let mut s = State::zeros(&g);
        s.phi = Field::from_fn(&g, |r, _| r);
        assert!(nonlinear_f(&g, &s).unwrap().is_zero());
    }

    #[test]
    fn centrifugal_term_alone() {
        let g = small_grid();
        let bg = build_background(&g, &FlowParams::default()).unwrap();
        let mut s = State::zeros(&g);
        s.v_theta = Field::from_fn(&g, |_, _| 0.3);
        let [g1, g2, g3] = nonlinear_g(&g, &s, &bg).unwrap();
        for i in 2..g.nr() - 2 {
            for j in 0..g.nz() {
                let r = g.r_nodes[i];
                assert!((g1.get(i, j) - 0.09 / r).abs() < 1e-14);
                assert!(g2.get(i, j).abs() < 1e-14);
                assert_eq!(g3.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn vacuum_state_is_rejected() {
        let g = small_grid();
        let bg = build_background(&g, &FlowParams::default()).unwrap();
        let mut s = State::zeros(&g);
        s.phi.set(5, 5, -10.0);
        assert!(matches!(rhs_perturbation(&g, &s, &bg), Err(Error::Positivity { i: 5, j: 5, .. })));
    }

    #[test]
    fn wall_tendency_of_velocity_is_zero() {
        let g = small_grid();
        let bg = build_background(&g, &FlowParams::default()).unwrap();
        let mut s = State::zeros(&g);
        s.phi = Field::from_fn(&g, |r, z| 1e-3 * (-(r - 2.0).powi(2) - z * z).exp());
        s.v_r = Field::from_fn(&g, |r, z| 1e-3 * (r - 1.0) * (-(r - 3.0).powi(2) - z * z).exp());
        s.enforce_velocity_bc(&g);
        let t = rhs_perturbation(&g, &s, &bg).unwrap();
        for j in 0..g.nz() {
            for f in [&t.v_r, &t.v_theta, &t.v_z] {
                assert_eq!(f.get(0, j), 0.0);
                assert_eq!(f.get(g.nr() - 1, j), 0.0);
            }
        }
        assert!(t.phi.row(0).iter().any(|v| *v != 0.0));
    }

    #[test]
    fn bump_basics() {
        let g = Grid::new(GridSpec::default().with_size(64, 64)).unwrap();
        let b = Bump::default();
        let s = make_bump_ic(&g, &b.with_amplitude(0.0)).unwrap();
        assert!(s.is_zero());
        assert_eq!(b.profile(6.0, 0.0), 1e-3);
        let s = make_bump_ic(&g, &b).unwrap();
        assert!(s.v_r.row(0).iter().all(|v| *v == 0.0));
        let bad = Bump { center: [3.0, 0.0], ..b };
        assert!(make_bump_ic(&g, &bad).is_err());
        let bad = Bump { center: [6.0, 6.0], ..b };
        assert!(make_bump_ic(&g, &bad).is_err());
    }

    #[test]
    fn masked_components_stay_zero() {
        let g = Grid::new(GridSpec::default().with_size(32, 32)).unwrap();
        let mask = ComponentMask { phi: true, v_r: false, v_theta: true, v_z: false };
        let s = make_bump_ic(&g, &Bump { mask, ..Bump::default() }).unwrap();
        assert!(!s.phi.is_zero() && !s.v_theta.is_zero());
        assert!(s.v_r.is_zero() && s.v_z.is_zero());
    }

    #[test]
    fn primitive_constant_state_is_steady() {
        let g = small_grid();
        let rho = Field::from_fn(&g, |_, _| 1.7);
        let z = Field::zeros(&g);
        let out = rhs_primitive(&g, &rho, &z, &z, &z, &FlowParams::default()).unwrap();
        assert!(out.iter().all(|f| f.is_zero()));
        let bad = Field::from_fn(&g, |_, _| 0.0);
        assert!(rhs_primitive(&g, &bad, &z, &z, &z, &FlowParams::default()).is_err());
    }
}
