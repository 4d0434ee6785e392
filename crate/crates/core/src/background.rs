//! The steady circulatory flow `(rho_bar(r), 0, M0 / r, 0)` around the unit
//! cylinder, in closed form, and a discrete check that it solves the steady
//! equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{Field, Grid};
use crate::quadrature::l2r;

/// Gas law `P = A rho^gamma` and viscosities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    #[serde(rename = "A")]
    pub a: f64,
    pub gamma: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub rho_bar0: f64,
    #[serde(rename = "M0")]
    pub m0: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { a: 1.0, gamma: 1.4, nu1: 0.1, nu2: 0.0, rho_bar0: 1.0, m0: 1.0 }
    }
}

impl FlowParams {
    pub fn new(a: f64, gamma: f64, nu1: f64, nu2: f64, rho_bar0: f64, m0: f64) -> Result<Self> {
        let p = FlowParams { a, gamma, nu1, nu2, rho_bar0, m0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str, f64); 6] = [
            (self.a > 0.0, "A > 0", self.a),
            (self.gamma > 1.0, "gamma > 1", self.gamma),
            (self.nu1 > 0.0, "nu1 > 0", self.nu1),
            (self.nu1 + self.nu2 > 0.0, "nu1 + nu2 > 0", self.nu1 + self.nu2),
            (self.rho_bar0 > 0.0, "rho_bar0 > 0", self.rho_bar0),
            (self.m0 > 0.0, "M0 > 0", self.m0),
        ];
        for (ok, what, got) in checks {
            if !ok || !got.is_finite() {
                return Err(Error::InvalidParams(format!("{what} (got {got})")));
            }
        }
        Ok(())
    }

    /// `M0^2 / (A gamma)`, the value of `r^3 rho_bar' rho_bar^(gamma-2)`.
    pub fn swirl_constant(&self) -> f64 {
        self.m0 * self.m0 / (self.a * self.gamma)
    }

    /// `lim_{r -> inf} rho_bar(r)`.
    pub fn far_field_density(&self) -> f64 {
        let g1 = self.gamma - 1.0;
        let base = pow_short(self.rho_bar0, g1) + g1 * self.m0 * self.m0 / (2.0 * self.a * self.gamma);
        pow_short(base, 1.0 / g1)
    }
}

/// `x^e` by exp/log, with exponents 0 and 1 returned exactly.
#[inline]
pub fn pow_short(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else {
        (e * x.ln()).exp()
    }
}

fn check_r(r: f64) -> Result<()> {
    if r >= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(r))
    }
}

pub fn bar_rho(r: f64, p: &FlowParams) -> Result<f64> {
    check_r(r)?;
    let g1 = p.gamma - 1.0;
    let base = pow_short(p.rho_bar0, g1) + g1 * p.m0 * p.m0 / (2.0 * p.a * p.gamma) * (1.0 - 1.0 / (r * r));
    Ok(pow_short(base, 1.0 / g1))
}

pub fn bar_rho_prime(r: f64, p: &FlowParams) -> Result<f64> {
    let rho = bar_rho(r, p)?;
    Ok(p.swirl_constant() * pow_short(rho, 2.0 - p.gamma) / (r * r * r))
}

pub fn bar_utheta(r: f64, p: &FlowParams) -> Result<f64> {
    check_r(r)?;
    Ok(p.m0 / r)
}

/// Background profiles tabulated at the radial nodes of a grid. The flow
/// depends on `r` only, so every column `i` holds the value for all `z`.
#[derive(Debug, Clone)]
pub struct BackgroundField {
    pub params: FlowParams,
    pub rho_bar: Vec<f64>,
    pub rho_bar_prime: Vec<f64>,
    /// `rho_bar^(gamma - 2)`
    pub rho_bar_gm2: Vec<f64>,
    pub u_theta_bar: Vec<f64>,
    /// `gamma A rho_bar^(gamma - 1)`
    pub sound_sq: Vec<f64>,
    /// `r` at each radial node (copied from the grid)
    pub r: Vec<f64>,
}

impl BackgroundField {
    pub fn new(grid: &Grid, params: &FlowParams) -> Result<Self> {
        params.validate()?;
        let n = grid.nr();
        let mut bg = BackgroundField {
            params: *params,
            rho_bar: Vec::with_capacity(n),
            rho_bar_prime: Vec::with_capacity(n),
            rho_bar_gm2: Vec::with_capacity(n),
            u_theta_bar: Vec::with_capacity(n),
            sound_sq: Vec::with_capacity(n),
            r: grid.r_nodes.clone(),
        };
        for &r in &grid.r_nodes {
            let rho = bar_rho(r, params)?;
            bg.rho_bar.push(rho);
            bg.rho_bar_prime.push(bar_rho_prime(r, params)?);
            bg.rho_bar_gm2.push(pow_short(rho, params.gamma - 2.0));
            bg.u_theta_bar.push(bar_utheta(r, params)?);
            bg.sound_sq.push(params.gamma * params.a * pow_short(rho, params.gamma - 1.0));
        }
        Ok(bg)
    }

    /// A radial profile broadcast over `z`.
    pub fn broadcast(grid: &Grid, profile: &[f64]) -> Field {
        Field::zeros(grid).map_indexed(|i, _, _| profile[i])
    }

    /// `rho_bar(r_max)` relative to the far-field density; close to 1 when the
    /// box captures most of the density rise.
    pub fn truncation_ratio(&self) -> f64 {
        self.rho_bar[self.rho_bar.len() - 1] / self.params.far_field_density()
    }
}

pub fn build_background(grid: &Grid, params: &FlowParams) -> Result<BackgroundField> {
    BackgroundField::new(grid, params)
}

/// Discrete `L^2_r` norms of the three steady equations evaluated on the
/// background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub continuity: f64,
    pub r_momentum: f64,
    pub theta_momentum: f64,
}

pub fn background_residual(grid: &Grid, params: &FlowParams) -> Result<ResidualReport> {
    let bg = BackgroundField::new(grid, params)?;
    let rho = BackgroundField::broadcast(grid, &bg.rho_bar);
    let ut = BackgroundField::broadcast(grid, &bg.u_theta_bar);
    let ur = Field::zeros(grid);
    let zero = Field::zeros(grid);

    // (1/r) d_r(r rho u_r)
    let flux = rho.zip_with(&ur, |_, _, a, b| a * b)?;
    let continuity = grid.cyl_div(&flux, &zero)?;

    // rho (u_r d_r u_r - u_t^2 / r) + d_r P - (nu1 + nu2) d_r((1/r) d_r(r u_r))
    let pressure = rho.map_indexed(|_, _, v| params.a * pow_short(v, params.gamma));
    let dp = grid.d_r(&pressure)?;
    let dur = grid.d_r(&ur)?;
    let div_ur = grid.cyl_div(&ur, &zero)?;
    let visc_r = grid.d_r(&div_ur)?;
    let nu_sum = params.nu1 + params.nu2;
    let r_mom = Field::zeros(grid).map_indexed(|i, j, _| {
        let r = grid.r_nodes[i];
        let (u_r, u_t) = (ur.get(i, j), ut.get(i, j));
        rho.get(i, j) * (u_r * dur.get(i, j) - u_t * u_t / r) + dp.get(i, j) - nu_sum * visc_r.get(i, j)
    });

    // rho (u_r d_r u_t + u_t u_r / r) - nu1 (d_r((1/r) d_r(r u_t)) + d_zz u_t)
    let r_ut = ut.map_indexed(|i, _, v| grid.r_nodes[i] * v);
    let inner = grid.d_r(&r_ut)?.map_indexed(|i, _, v| v / grid.r_nodes[i]);
    let outer = grid.d_r(&inner)?;
    let ut_zz = grid.d_zz(&ut)?;
    let dut = grid.d_r(&ut)?;
    let t_mom = Field::zeros(grid).map_indexed(|i, j, _| {
        let r = grid.r_nodes[i];
        let (u_r, u_t) = (ur.get(i, j), ut.get(i, j));
        rho.get(i, j) * (u_r * dut.get(i, j) + u_t * u_r / r)
            - params.nu1 * (outer.get(i, j) + ut_zz.get(i, j))
    });

    Ok(ResidualReport {
        continuity: l2r(grid, &continuity),
        r_momentum: l2r(grid, &r_mom),
        theta_momentum: l2r(grid, &t_mom),
    })
}
