//! Fixed-order reductions.
//!
//! Every sum in the crate goes through [`pairwise_sum`] so that results do not
//! depend on how many threads evaluated the summands.

use rayon::prelude::*;

const BLOCK: usize = 16;

/// Pairwise (cascade) summation with a fixed split pattern.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sum of `f(i, j)` over a row-major `nr x nz` index space.
///
/// Rows are summed in parallel, each with [`pairwise_sum`], and the row sums
/// are then combined pairwise in row order. The grouping is fixed by the
/// shape alone.
pub fn grid_sum<F>(nr: usize, nz: usize, f: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let rows: Vec<f64> = (0..nr)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..nz).map(|j| f(i, j)).collect();
            pairwise_sum(&row)
        })
        .collect();
    pairwise_sum(&rows)
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Observed order of convergence `log(e_coarse / e_fine) / log(h_coarse / h_fine)`
/// fitted over a refinement ladder (log-log least squares).
pub fn observed_order(h: &[f64], err: &[f64]) -> f64 {
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    ls_slope(&lx, &ly)
}
