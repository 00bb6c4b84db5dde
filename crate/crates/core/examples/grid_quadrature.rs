//! Builds the momentum grid and checks the coupling norm against its closed form.

use bhf::grid::analytic_g_norm2;
use bhf::MomentumGrid;

fn main() -> bhf::Result<()> {
    let (sigma, cutoff, g) = (0.5, 2.0, 0.1);
    for (nr, nang) in [(2, 6), (4, 14), (8, 26), (8, 50)] {
        let grid = MomentumGrid::build(sigma, cutoff, nr, nang)?;
        let norm2 = grid.coupling_field(g).norm2();
        println!(
            "nr={nr:<2} nang={nang:<3} nodes={:<4} shell volume {:.10}  |G|^2 {:.12e}",
            grid.len(),
            grid.weight_sum(),
            norm2
        );
    }
    println!("closed form |G|^2 {:.12e}", analytic_g_norm2(g, sigma, cutoff));
    Ok(())
}
