//! Small-coupling coefficients: the mixed g²|p|² term against its reduced
//! integral and a published closed form, the g⁴ term, and the fourth-order
//! prediction against the minimizer.

use bhf::perturbation::{c22_quadrature, c40_grid, c40_quadrature, energy_fourth_order};
use bhf::variational::{minimize_quasifree, MinimizeOptions};
use bhf::{Fiber, MomentumGrid};

fn main() -> bhf::Result<()> {
    let wide = MomentumGrid::build(1.0, 10.0, 8, 26)?;
    let c22 = c22_quadrature(&wide);
    println!("C22 grid {:.8}  reduced {:.8}  closed form {:.8}  ratio {:.5}  flagged {}",
        c22.quadrature, c22.reduced_oracle, c22.closed_form_candidate, c22.ratio_to_closed_form, c22.discrepancy);

    let grid = MomentumGrid::build(0.5, 2.0, 8, 26)?;
    println!("C40 grid {:.8}  reduced {:.8}", c40_grid(&grid), c40_quadrature(0.5, 2.0, 32));

    for s in [1.0, 0.5, 0.25] {
        let fiber = Fiber::new(&grid, 0.1 * s, [0.0, 0.0, 0.2 * s]);
        let pred = energy_fourth_order(&fiber);
        let e = minimize_quasifree(&fiber, &MinimizeOptions { tol: 1e-12, ..Default::default() })?.energy;
        println!("scale {s:<5} E {e:.14}  prediction {:.14}  gap {:.3e}", pred.e_pred, (e - pred.e_pred).abs());
    }
    Ok(())
}
