//! Minimizes over coherent states by iterating the dressed-momentum map.

use bhf::coherent::{coherent_p2_expansion, solve_coherent, solve_coherent_anderson};
use bhf::{Fiber, MomentumGrid};

fn main() -> bhf::Result<()> {
    let grid = MomentumGrid::build(0.5, 2.0, 8, 26)?;
    let fiber = Fiber::new(&grid, 0.05, [0.0, 0.0, 0.3]);

    let rep = solve_coherent(&fiber, 1e-12, 200)?;
    println!("Picard:   E = {:.14}  u = {:?}  iterations {}", rep.energy, rep.u, rep.iterations);
    println!("contraction ratios {:?}", rep.contraction_trace.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>());

    let acc = solve_coherent_anderson(&fiber, 1e-12, 200, 3)?;
    println!("Anderson: E = {:.14}  iterations {}", acc.energy, acc.iterations);
    println!("p^2 expansion {:.14}", coherent_p2_expansion(&fiber)?);
    Ok(())
}
