//! Solves the self-consistent stationarity equations and prints the residual history.

use bhf::lagrange::lagrange_iterate;
use bhf::{Fiber, MomentumGrid};

fn main() -> bhf::Result<()> {
    let grid = MomentumGrid::build(0.5, 2.0, 6, 14)?;
    let fiber = Fiber::new(&grid, 0.05, [0.1, 0.0, 0.1]);
    let rep = lagrange_iterate(&fiber, 1e-10, 200)?;
    for (i, r) in rep.residual_trace.iter().enumerate() {
        println!("sweep {:>2}: max residual {r:.3e}", i + 1);
    }
    println!("E = {:.14}  photon number {:.6e}", rep.energy, rep.photon_number);
    println!("converged {}  certified {}", rep.converged, rep.certified);
    println!("{}", serde_json::to_string_pretty(&rep.residuals).unwrap());
    Ok(())
}
