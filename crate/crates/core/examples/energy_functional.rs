//! Evaluates the closed-form energy and its gradient for a random pure state.

use bhf::quasifree::{sample_squeeze, state_from_squeeze};
use bhf::{Fiber, MomentumGrid};

fn main() -> bhf::Result<()> {
    let grid = MomentumGrid::build(0.5, 2.0, 4, 14)?;
    let fiber = Fiber::new(&grid, 0.2, [0.0, 0.1, 0.2]);
    let (f, r) = sample_squeeze(1, 0.01, grid.len());
    let state = state_from_squeeze(&f, &r)?;

    let e = fiber.energy(&state)?;
    println!("vacuum energy      {:.12}", fiber.vacuum_energy());
    println!("total              {:.12}", e.total);
    println!("  kinetic square   {:.12}", e.kinetic_square);
    println!("  field quadratic  {:.12}", e.field_quadratic);
    println!("  pairing group    {:.12}", e.pairing_group);
    println!("  photon energy    {:.12}", e.photon_energy);

    let (gf, gr) = fiber.grad_squeeze(&f, &r)?;
    println!("gradient norms: displacement {:.6e}, kernel {:.6e}", gf.norm(), gr.norm());
    Ok(())
}
