//! Structured mesh on the truncated exterior domain `[1, r_max] x [z_min, z_max]`
//! and the second-order finite-difference operators built on it.
//!
//! Radial derivatives are taken in the uniform mapped coordinate `xi` and
//! converted with the analytic metric of the exponential stretching map.
//! Factors of `1/r` use exact node radii; `r >= 1` so there is no axis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZBoundary {
    #[default]
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n_r: usize,
    pub n_z: usize,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub beta: f64,
    pub z_boundary: ZBoundary,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_r: 128,
            n_z: 128,
            r_max: 21.0,
            z_min: -10.0,
            z_max: 10.0,
            beta: 1.0,
            z_boundary: ZBoundary::Periodic,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_r < MIN_NODES || self.n_z < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "n_r, n_z >= {MIN_NODES} (got {} x {})",
                self.n_r, self.n_z
            )));
        }
        if !(self.r_max > 1.0) || !self.r_max.is_finite() {
            return Err(Error::InvalidGrid(format!("r_max > 1 (got {})", self.r_max)));
        }
        if !(self.z_max > self.z_min) || !self.z_min.is_finite() || !self.z_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "z_max > z_min (got [{}, {}])",
                self.z_min, self.z_max
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidGrid(format!("beta >= 0 (got {})", self.beta)));
        }
        Ok(())
    }

    pub fn periodic_z(&self) -> bool {
        self.z_boundary == ZBoundary::Periodic
    }

    /// Same box and stretching with a different resolution.
    pub fn with_size(&self, n_r: usize, n_z: usize) -> GridSpec {
        GridSpec { n_r, n_z, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub r_nodes: Vec<f64>,
    pub z_nodes: Vec<f64>,
    /// dr/dxi at each radial node.
    pub dr_dxi: Vec<f64>,
    /// d2r/dxi2 at each radial node.
    pub d2r_dxi2: Vec<f64>,
    pub dxi: f64,
    pub dz: f64,
    /// Trapezoid weights in physical r.
    pub wr: Vec<f64>,
    /// Trapezoid weights in z (uniform when periodic).
    pub wz: Vec<f64>,
}

// below this the exponential map is numerically the identity
const BETA_UNIFORM: f64 = 1e-10;

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Grid> {
        spec.validate()?;
        let nr = spec.n_r;
        let nz = spec.n_z;
        let span = spec.r_max - 1.0;
        let dxi = 1.0 / (nr - 1) as f64;
        let beta = spec.beta;

        let mut r_nodes = Vec::with_capacity(nr);
        let mut dr_dxi = Vec::with_capacity(nr);
        let mut d2r_dxi2 = Vec::with_capacity(nr);
        for i in 0..nr {
            let xi = i as f64 * dxi;
            if beta < BETA_UNIFORM {
                r_nodes.push(1.0 + span * xi);
                dr_dxi.push(span);
                d2r_dxi2.push(0.0);
            } else {
                let denom = beta.exp_m1();
                r_nodes.push(1.0 + span * (beta * xi).exp_m1() / denom);
                let m = span * beta * (beta * xi).exp() / denom;
                dr_dxi.push(m);
                d2r_dxi2.push(beta * m);
            }
        }
        r_nodes[0] = 1.0;
        r_nodes[nr - 1] = spec.r_max;

        let lz = spec.z_max - spec.z_min;
        let (dz, z_nodes, wz) = match spec.z_boundary {
            ZBoundary::Periodic => {
                let dz = lz / nz as f64;
                let z: Vec<f64> = (0..nz).map(|j| spec.z_min + j as f64 * dz).collect();
                (dz, z, vec![dz; nz])
            }
            ZBoundary::Dirichlet => {
                let dz = lz / (nz - 1) as f64;
                let mut z: Vec<f64> = (0..nz).map(|j| spec.z_min + j as f64 * dz).collect();
                z[nz - 1] = spec.z_max;
                let mut w = vec![dz; nz];
                w[0] = 0.5 * dz;
                w[nz - 1] = 0.5 * dz;
                (dz, z, w)
            }
        };

        let mut wr = vec![0.0; nr];
        for i in 0..nr {
            let lo = if i > 0 { r_nodes[i] - r_nodes[i - 1] } else { 0.0 };
            let hi = if i + 1 < nr { r_nodes[i + 1] - r_nodes[i] } else { 0.0 };
            wr[i] = 0.5 * (lo + hi);
        }

        Ok(Grid { spec, r_nodes, z_nodes, dr_dxi, d2r_dxi2, dxi, dz, wr, wz })
    }

    pub fn nr(&self) -> usize {
        self.spec.n_r
    }

    pub fn nz(&self) -> usize {
        self.spec.n_z
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.spec.n_r, self.spec.n_z)
    }

    pub fn len(&self) -> usize {
        self.spec.n_r * self.spec.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn periodic(&self) -> bool {
        self.spec.z_boundary == ZBoundary::Periodic
    }

    /// Physical radial spacing around node `i`.
    pub fn dr_local(&self, i: usize) -> f64 {
        self.dr_dxi[i] * self.dxi
    }

    /// Trapezoid weight of node `(i, j)` for the `dr dz` measure.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.wr[i] * self.wz[j]
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.shape() != self.shape() {
            return Err(Error::ShapeMismatch { expected: self.shape(), got: f.shape() });
        }
        Ok(())
    }

    /// d/dr, second order everywhere (one-sided three-point at r = 1, r_max).
    pub fn d_r(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let (nr, nz) = self.shape();
        let inv2 = 0.5 / self.dxi;
        let mut out = Field::zeros_shape(nr, nz);
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let scale = inv2 / self.dr_dxi[i];
            let row_at = |k: usize| &f.data[k * nz..(k + 1) * nz];
            if i == 0 {
                let (a, b, c) = (row_at(0), row_at(1), row_at(2));
                for j in 0..nz {
                    row[j] = (3.0 * (b[j] - a[j]) - (c[j] - b[j])) * scale;
                }
            } else if i == nr - 1 {
                let (a, b, c) = (row_at(nr - 1), row_at(nr - 2), row_at(nr - 3));
                for j in 0..nz {
                    row[j] = (3.0 * (a[j] - b[j]) - (b[j] - c[j])) * scale;
                }
            } else {
                let (m, p) = (row_at(i - 1), row_at(i + 1));
                for j in 0..nz {
                    row[j] = (p[j] - m[j]) * scale;
                }
            }
        });
        Ok(out)
    }

    /// d2/dr2 via the chain rule `(f_xixi - (r_xixi / r_xi) f_xi) / r_xi^2`.
    /// Boundary rows use the four-point one-sided second difference.
    pub fn d_rr(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let (nr, nz) = self.shape();
        let inv2 = 0.5 / self.dxi;
        let inv_sq = 1.0 / (self.dxi * self.dxi);
        let mut out = Field::zeros_shape(nr, nz);
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let m1 = self.dr_dxi[i];
            let m2 = self.d2r_dxi2[i];
            let c1 = m2 / m1;
            let c0 = 1.0 / (m1 * m1);
            let row_at = |k: usize| &f.data[k * nz..(k + 1) * nz];
            if i == 0 || i == nr - 1 {
                let s = if i == 0 { [0, 1, 2, 3] } else { [nr - 1, nr - 2, nr - 3, nr - 4] };
                let (a, b, c, d) = (row_at(s[0]), row_at(s[1]), row_at(s[2]), row_at(s[3]));
                // orientation flips the sign of the first difference only
                let sign = if i == 0 { 1.0 } else { -1.0 };
                for j in 0..nz {
                    let fxx = (2.0 * (a[j] - b[j]) - 3.0 * (b[j] - c[j]) + (c[j] - d[j])) * inv_sq;
                    let fx = sign * (3.0 * (b[j] - a[j]) - (c[j] - b[j])) * inv2;
                    row[j] = (fxx - c1 * fx) * c0;
                }
            } else {
                let (m, o, p) = (row_at(i - 1), row_at(i), row_at(i + 1));
                for j in 0..nz {
                    let fxx = ((p[j] - o[j]) - (o[j] - m[j])) * inv_sq;
                    let fx = (p[j] - m[j]) * inv2;
                    row[j] = (fxx - c1 * fx) * c0;
                }
            }
        });
        Ok(out)
    }

    /// d/dz; wraparound when periodic, one-sided three-point ends otherwise.
    pub fn d_z(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let (nr, nz) = self.shape();
        let scale = 0.5 / self.dz;
        let periodic = self.periodic();
        let mut out = Field::zeros_shape(nr, nz);
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let src = &f.data[i * nz..(i + 1) * nz];
            for j in 1..nz - 1 {
                row[j] = (src[j + 1] - src[j - 1]) * scale;
            }
            if periodic {
                row[0] = (src[1] - src[nz - 1]) * scale;
                row[nz - 1] = (src[0] - src[nz - 2]) * scale;
            } else {
                row[0] = (3.0 * (src[1] - src[0]) - (src[2] - src[1])) * scale;
                row[nz - 1] = (3.0 * (src[nz - 1] - src[nz - 2]) - (src[nz - 2] - src[nz - 3])) * scale;
            }
        });
        Ok(out)
    }

    pub fn d_zz(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let (nr, nz) = self.shape();
        let scale = 1.0 / (self.dz * self.dz);
        let periodic = self.periodic();
        let mut out = Field::zeros_shape(nr, nz);
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let s = &f.data[i * nz..(i + 1) * nz];
            for j in 1..nz - 1 {
                row[j] = ((s[j + 1] - s[j]) - (s[j] - s[j - 1])) * scale;
            }
            if periodic {
                row[0] = ((s[1] - s[0]) - (s[0] - s[nz - 1])) * scale;
                row[nz - 1] = ((s[0] - s[nz - 1]) - (s[nz - 1] - s[nz - 2])) * scale;
            } else {
                row[0] = (2.0 * (s[0] - s[1]) - 3.0 * (s[1] - s[2]) + (s[2] - s[3])) * scale;
                let n = nz - 1;
                row[n] = (2.0 * (s[n] - s[n - 1]) - 3.0 * (s[n - 1] - s[n - 2]) + (s[n - 2] - s[n - 3])) * scale;
            }
        });
        Ok(out)
    }

    /// `(1/r) d_r(r v_r) + d_z v_z`, evaluated as `d_r v_r + v_r / r + d_z v_z`.
    pub fn cyl_div(&self, v_r: &Field, v_z: &Field) -> Result<Field> {
        let dr = self.d_r(v_r)?;
        let dz = self.d_z(v_z)?;
        let nz = self.nz();
        let mut out = dr;
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let inv_r = 1.0 / self.r_nodes[i];
            let vr = &v_r.data[i * nz..(i + 1) * nz];
            let vz = &dz.data[i * nz..(i + 1) * nz];
            for j in 0..nz {
                row[j] += vr[j] * inv_r + vz[j];
            }
        });
        Ok(out)
    }

    /// Vector-Laplacian component for `u_r`, `u_theta`:
    /// `d_r((1/r) d_r(r w)) + d_zz w = w_rr + w_r / r - w / r^2 + w_zz`.
    pub fn visc_swirl(&self, w: &Field) -> Result<Field> {
        self.laplacian_like(w, true)
    }

    /// Scalar cylindrical Laplacian `w_rr + w_r / r + w_zz`.
    pub fn visc_axial(&self, w: &Field) -> Result<Field> {
        self.laplacian_like(w, false)
    }

    fn laplacian_like(&self, w: &Field, swirl: bool) -> Result<Field> {
        let wrr = self.d_rr(w)?;
        let wr = self.d_r(w)?;
        let wzz = self.d_zz(w)?;
        let nz = self.nz();
        let mut out = wrr;
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let inv_r = 1.0 / self.r_nodes[i];
            let base = i * nz;
            for j in 0..nz {
                let k = base + j;
                let mut v = row[j] + wr.data[k] * inv_r;
                if swirl {
                    v -= w.data[k] * inv_r * inv_r;
                }
                row[j] = v + wzz.data[k];
            }
        });
        Ok(out)
    }

    /// `d_r^a d_z^b w`, built from `d_rr`/`d_r` and `d_zz`/`d_z`.
    pub fn mixed(&self, w: &Field, a: usize, b: usize) -> Result<Field> {
        let mut f = w.clone();
        let mut b = b;
        while b >= 2 {
            f = self.d_zz(&f)?;
            b -= 2;
        }
        if b == 1 {
            f = self.d_z(&f)?;
        }
        let mut a = a;
        while a >= 2 {
            f = self.d_rr(&f)?;
            a -= 2;
        }
        if a == 1 {
            f = self.d_r(&f)?;
        }
        Ok(f)
    }
}

/// Scalar values on the grid nodes, row-major in `(i, j)` with `j` (axial)
/// contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nr: usize,
    nz: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field::zeros_shape(grid.nr(), grid.nz())
    }

    pub fn zeros_shape(nr: usize, nz: usize) -> Field {
        Field { nr, nz, data: vec![0.0; nr * nz] }
    }

    pub fn from_vec(nr: usize, nz: usize, data: Vec<f64>) -> Result<Field> {
        if data.len() != nr * nz {
            return Err(Error::ShapeMismatch { expected: (nr, nz), got: (data.len(), 1) });
        }
        Ok(Field { nr, nz, data })
    }

    /// Sample `f(r, z)` at every node.
    pub fn from_fn<F>(grid: &Grid, f: F) -> Field
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let nz = grid.nz();
        let mut out = Field::zeros(grid);
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let r = grid.r_nodes[i];
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(r, grid.z_nodes[j]);
            }
        });
        out
    }

    /// Pointwise combination `f(i, j, value)` of a field.
    pub fn map_indexed<F>(&self, f: F) -> Field
    where
        F: Fn(usize, usize, f64) -> f64 + Sync,
    {
        let nz = self.nz;
        let mut out = self.clone();
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j, *v);
            }
        });
        out
    }

    /// Pointwise `f(i, j, a, b)` of two equally shaped fields.
    pub fn zip_with<F>(&self, other: &Field, f: F) -> Result<Field>
    where
        F: Fn(usize, usize, f64, f64) -> f64 + Sync,
    {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch { expected: self.shape(), got: other.shape() });
        }
        let nz = self.nz;
        let mut out = self.clone();
        out.data.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let o = &other.data[i * nz..(i + 1) * nz];
            for j in 0..nz {
                row[j] = f(i, j, row[j], o[j]);
            }
        });
        Ok(out)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nr, self.nz)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.nz + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.nz + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.nz..(i + 1) * self.nz]
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field { nr: self.nr, nz: self.nz, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        debug_assert_eq!(self.shape(), other.shape());
        Field {
            nr: self.nr,
            nz: self.nz,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    /// Fails on the first NaN or infinity, naming `what` and the node.
    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::NonFinite { what, i: k / self.nz, j: k % self.nz }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(nr: usize, nz: usize, beta: f64, zb: ZBoundary) -> GridSpec {
        GridSpec { n_r: nr, n_z: nz, r_max: 3.0, z_min: 0.0, z_max: 1.0, beta, z_boundary: zb }
    }

    #[test]
    fn uniform_map_three_nodes() {
        // the node-count floor is 16; the map itself is checked directly
        let g = Grid::new(spec(17, 16, 0.0, ZBoundary::Periodic)).unwrap();
        assert_eq!(g.r_nodes[0], 1.0);
        assert_eq!(g.r_nodes[8], 2.0);
        assert_eq!(g.r_nodes[16], 3.0);
    }

    #[test]
    fn stretched_endpoints_exact_and_spacing_ratio() {
        let s = GridSpec { n_r: 65, n_z: 16, r_max: 21.0, beta: 2.0, ..GridSpec::default() };
        let g = Grid::new(s).unwrap();
        assert_eq!(g.r_nodes[0], 1.0);
        assert_eq!(g.r_nodes[64], 21.0);
        assert!(g.r_nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(g.dr_dxi.iter().all(|m| *m > 0.0));
        let first = g.r_nodes[1] - g.r_nodes[0];
        let last = g.r_nodes[64] - g.r_nodes[63];
        let expect = (2.0_f64 * 63.0 / 64.0).exp();
        assert!((last / first / expect - 1.0).abs() < 1e-10, "{}", last / first);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(Grid::new(spec(8, 16, 0.0, ZBoundary::Periodic)).is_err());
        let mut s = spec(16, 16, 0.0, ZBoundary::Periodic);
        s.r_max = 1.0;
        assert!(Grid::new(s.clone()).is_err());
        s.r_max = 2.0;
        s.z_max = s.z_min;
        assert!(Grid::new(s.clone()).is_err());
        s.z_max = 1.0;
        s.beta = -0.1;
        assert!(Grid::new(s).is_err());
    }

    #[test]
    fn constants_annihilated_exactly() {
        for zb in [ZBoundary::Periodic, ZBoundary::Dirichlet] {
            let g = Grid::new(spec(20, 18, 1.7, zb)).unwrap();
            let c = Field::from_fn(&g, |_, _| 0.7316);
            for d in [g.d_r(&c), g.d_rr(&c), g.d_z(&c), g.d_zz(&c), g.visc_axial(&c)] {
                assert!(d.unwrap().is_zero());
            }
        }
    }

    #[test]
    fn exact_on_low_degree_polynomials_uniform() {
        let g = Grid::new(spec(20, 16, 0.0, ZBoundary::Dirichlet)).unwrap();
        let r = Field::from_fn(&g, |r, _| r);
        let dr = g.d_r(&r).unwrap();
        assert!(dr.data.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let div = g.cyl_div(&r, &Field::zeros(&g)).unwrap();
        assert!(div.data.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(g.visc_swirl(&r).unwrap().data.iter().all(|v| v.abs() < 1e-12));
        let r2 = Field::from_fn(&g, |r, _| r * r);
        assert!(g.visc_swirl(&r2).unwrap().data.iter().all(|v| (v - 3.0).abs() < 1e-11));
        assert!(g.visc_axial(&r2).unwrap().data.iter().all(|v| (v - 4.0).abs() < 1e-11));
        let z = Field::from_fn(&g, |_, z| 2.0 * z - 1.0);
        assert!(g.d_z(&z).unwrap().data.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn constant_axial_velocity_has_zero_divergence() {
        let g = Grid::new(spec(16, 16, 0.5, ZBoundary::Dirichlet)).unwrap();
        let c = Field::from_fn(&g, |_, _| 3.25);
        assert!(g.cyl_div(&Field::zeros(&g), &c).unwrap().is_zero());
    }

    #[test]
    fn periodic_mode_maps_to_scaled_mode() {
        let g = Grid::new(spec(16, 32, 0.0, ZBoundary::Periodic)).unwrap();
        let k = 2.0 * std::f64::consts::PI * 3.0;
        let s = Field::from_fn(&g, |_, z| (k * z).sin());
        let d = g.d_z(&s).unwrap();
        let kh = (k * g.dz).sin() / g.dz;
        for i in 0..16 {
            for j in 0..32 {
                let want = kh * (k * g.z_nodes[j]).cos();
                assert!((d.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let g = Grid::new(spec(16, 16, 0.0, ZBoundary::Periodic)).unwrap();
        let bad = Field::zeros_shape(17, 16);
        assert!(matches!(g.d_r(&bad), Err(Error::ShapeMismatch { .. })));
        assert!(g.cyl_div(&Field::zeros(&g), &bad).is_err());
    }

    #[test]
    fn check_finite_reports_node() {
        let g = Grid::new(spec(16, 16, 0.0, ZBoundary::Periodic)).unwrap();
        let mut f = Field::zeros(&g);
        f.set(3, 5, f64::NAN);
        assert_eq!(f.check_finite("phi"), Err(Error::NonFinite { what: "phi", i: 3, j: 5 }));
    }
}
