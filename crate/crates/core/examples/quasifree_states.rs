//! Squeeze kernels, their Takagi factorization and the resulting one-body
//! and pairing matrices.

use bhf::linalg;
use bhf::quasifree::{pureness_residual, sample_squeeze, state_from_squeeze, takagi};

fn main() -> bhf::Result<()> {
    let (f, r) = sample_squeeze(7, 0.3, 5);
    let tk = takagi(&r)?;
    println!("Takagi values: {:?}", tk.s.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>());
    println!("reconstruction error {:.2e}", (tk.reconstruct() - &r.0).norm_l2());

    let state = state_from_squeeze(&f, &r)?;
    println!("photon number Tr[gamma] + |f|^2 = {:.6}", state.photon_number());
    println!("pureness residual |gamma + gamma^2 - t t*| = {:.2e}", pureness_residual(&state.gamma, &state.t));
    println!("pairing matrix asymmetry {:.2e}", linalg::asymmetry(&state.t));
    Ok(())
}
