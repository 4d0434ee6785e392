//! Closed-form background: the two radial identities at scattered radii,
//! and the discrete steady residual on a refinement ladder.

use circflow::background::{bar_rho, bar_rho_prime, bar_utheta};
use circflow::experiments::steady_check;
use circflow::{FlowParams, GridSpec};

fn main() -> circflow::Result<()> {
    for gamma in [1.4, 2.0, 3.0] {
        let p = FlowParams { gamma, ..FlowParams::default() };
        let (mut worst_force, mut worst_swirl) = (0.0_f64, 0.0_f64);
        for k in 0..=1000 {
            let r = 1.0 + 99.0 * k as f64 / 1000.0;
            let (rho, drho, u) = (bar_rho(r, &p)?, bar_rho_prime(r, &p)?, bar_utheta(r, &p)?);
            // pressure gradient balances the centrifugal force
            let lhs = p.a * gamma * rho.powf(gamma - 1.0) * drho;
            let rhs = rho * u * u / r;
            worst_force = worst_force.max((lhs - rhs).abs() / rhs.abs());
            let c = r.powi(3) * drho * rho.powf(gamma - 2.0);
            worst_swirl = worst_swirl.max((c / p.swirl_constant() - 1.0).abs());
        }
        println!("gamma {gamma}: force balance {worst_force:.2e}, swirl constant {worst_swirl:.2e}, rho(inf) {:.6}", p.far_field_density());
    }

    let p = FlowParams::default();
    let report = steady_check(&p, &GridSpec::default(), &[64, 128, 256], 1.9, 1e-12)?;
    print!("{}", report.to_csv());
    println!("r-momentum order {:.3}, pass {}", report.r_order, report.pass);
    Ok(())
}
