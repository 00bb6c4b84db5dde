//! Compares the closed-form energy with brute-force expectations on a
//! truncated Fock space over two and three modes.

use bhf::cli::oracle_nodes;
use bhf::fock::agreement_table;
use bhf::quasifree::sample_squeeze;
use bhf::MomentumGrid;

fn main() -> bhf::Result<()> {
    let grid = MomentumGrid::build(0.5, 2.0, 8, 26)?;
    for d in [2, 3] {
        let small = grid.subgrid(&oracle_nodes(grid.len(), d))?;
        let (f, r) = sample_squeeze(d as u64, 0.15, d);
        println!("{d} modes");
        for row in agreement_table(&small, 0.3, [0.1, 0.0, -0.2], &f, &r, &[2, 4, 6, 8])? {
            println!("  nmax {:>2}  dim {:>4}  oracle {:.14}  functional {:.14}  rel error {:.2e}",
                row.nmax, row.dim, row.oracle, row.functional, row.rel_error);
        }
    }
    Ok(())
}
