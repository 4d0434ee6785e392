//! Trapezoid quadrature on the stretched grid for the `dr dz` measure.
//! Radial weights (`r^alpha`) are always written explicitly by the caller.

use crate::error::{Error, Result};
use crate::operators::{Field, Grid};
use crate::reduce::grid_sum;

/// `(sum_ij W_ij |w|^p r^alpha)^(1/p)`.
pub fn weighted_lp(grid: &Grid, w: &Field, alpha: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParams(format!("norm order p >= 1 (got {p})")));
    }
    if w.shape() != grid.shape() {
        return Err(Error::ShapeMismatch { expected: grid.shape(), got: w.shape() });
    }
    let s = grid_sum(grid.nr(), grid.nz(), |i, j| {
        let ra = if alpha == 0.0 { 1.0 } else { grid.r_nodes[i].powf(alpha) };
        grid.weight(i, j) * w.get(i, j).abs().powf(p) * ra
    });
    Ok(s.powf(1.0 / p))
}

/// `||sqrt(r) w||_2^2 = int w^2 r dr dz`.
pub fn r_sq(grid: &Grid, w: &Field) -> f64 {
    grid_sum(grid.nr(), grid.nz(), |i, j| {
        let v = w.get(i, j);
        grid.weight(i, j) * grid.r_nodes[i] * v * v
    })
}

/// `int weight(i) * w^2 dr dz` for a radial weight profile.
pub fn radial_weighted_sq(grid: &Grid, w: &Field, weight: &[f64]) -> f64 {
    grid_sum(grid.nr(), grid.nz(), |i, j| {
        let v = w.get(i, j);
        grid.weight(i, j) * weight[i] * v * v
    })
}

/// `(a, weight * b) = int a b weight(i) dr dz`.
pub fn inner_weighted(grid: &Grid, a: &Field, b: &Field, weight: &[f64]) -> f64 {
    grid_sum(grid.nr(), grid.nz(), |i, j| grid.weight(i, j) * weight[i] * a.get(i, j) * b.get(i, j))
}

/// Plain `(a, b) = int a b dr dz`.
pub fn inner(grid: &Grid, a: &Field, b: &Field) -> f64 {
    grid_sum(grid.nr(), grid.nz(), |i, j| grid.weight(i, j) * a.get(i, j) * b.get(i, j))
}

/// `L^2_r` norm.
pub fn l2r(grid: &Grid, w: &Field) -> f64 {
    r_sq(grid, w).sqrt()
}
