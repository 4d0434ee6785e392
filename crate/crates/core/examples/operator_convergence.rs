//! Second-order accuracy of the stretched-grid operators on a smooth field.

use circflow::quadrature::l2r;
use circflow::reduce::observed_order;
use circflow::{Field, Grid, GridSpec};

fn main() -> circflow::Result<()> {
    let spec = GridSpec { r_max: 6.0, z_min: 0.0, z_max: std::f64::consts::TAU, ..GridSpec::default() };
    let f = |r: f64, z: f64| (-(r - 3.0).powi(2)).exp() * z.sin();
    let f_r = |r: f64, z: f64| -2.0 * (r - 3.0) * f(r, z);
    let f_zz = |r: f64, z: f64| -f(r, z);
    let f_rr = |r: f64, z: f64| (4.0 * (r - 3.0).powi(2) - 2.0) * f(r, z);

    let ladder = [32, 64, 128, 256];
    let mut errs = [Vec::new(), Vec::new(), Vec::new()];
    for &n in &ladder {
        let g = Grid::new(spec.with_size(n, n))?;
        let w = Field::from_fn(&g, f);
        let pairs = [(g.d_r(&w)?, Field::from_fn(&g, f_r)), (g.d_rr(&w)?, Field::from_fn(&g, f_rr)), (g.d_zz(&w)?, Field::from_fn(&g, f_zz))];
        for (k, (num, exact)) in pairs.iter().enumerate() {
            errs[k].push(l2r(&g, &num.axpy(-1.0, exact)));
        }
    }
    let h: Vec<f64> = ladder.iter().map(|&n| 1.0 / n as f64).collect();
    for (name, e) in ["d_r", "d_rr", "d_zz"].iter().zip(&errs) {
        println!("{name:>5}: {:?}  order {:.3}", e.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>(), observed_order(&h, e));
    }
    Ok(())
}
