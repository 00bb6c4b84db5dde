//! Direct minimization over displaced squeezed states, with the convexity
//! and coercivity probes.

use bhf::coherent::solve_coherent;
use bhf::variational::{coercivity_check, convexity_check, minimize_quasifree, MinimizeOptions, Strategy};
use bhf::{Fiber, MomentumGrid};

fn main() -> bhf::Result<()> {
    let grid = MomentumGrid::build(0.5, 2.0, 4, 14)?;
    let fiber = Fiber::new(&grid, 0.08, [0.0, 0.1, 0.2]);

    for strategy in [Strategy::Preconditioned, Strategy::Gradient] {
        let opts = MinimizeOptions { strategy, max_iter: 5000, ball_samples: 4, ..Default::default() };
        let rep = minimize_quasifree(&fiber, &opts)?;
        println!(
            "{strategy:?}: E = {:.14}  iterations {}  |grad| {:.1e}  certified {}  ball {:?}",
            rep.energy, rep.iterations, rep.grad_norm, rep.certified, rep.r_estimate
        );
    }
    println!("coherent minimum {:.14}", solve_coherent(&fiber, 1e-12, 200)?.energy);
    println!("min Hessian Rayleigh quotient {:.4} (sigma/4 = {})", convexity_check(&fiber, 10, 0)?, 0.125);
    println!("worst coercivity ratio {:.4}", coercivity_check(&fiber, 50, 0)?);
    Ok(())
}
