//! Bogolubov-Hartree-Fock energies for the translation-invariant Pauli-Fierz
//! fiber Hamiltonian.
//!
//! The photon field lives on a discretized momentum shell ([`grid`]). Trial
//! states are quasifree ([`quasifree`]) and their energy is given in closed
//! form ([`energy`]). Three solvers minimize it: a fixed point over coherent
//! states ([`coherent`]), descent over displaced squeezed states
//! ([`variational`]) and the self-consistent Lagrange system ([`lagrange`]).
//! [`perturbation`] holds the small-coupling asymptotics and [`fock`] a
//! brute-force truncated Fock space model used to cross-check the closed form.

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops mirror
// the matrix notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod coherent;
pub mod energy;
pub mod error;
pub mod fock;
pub mod grid;
pub mod lagrange;
pub mod linalg;
pub mod perturbation;
pub mod quadrature;
pub mod quasifree;
pub mod variational;

pub use energy::{EnergyBreakdown, Fiber};
pub use error::{Error, Result};
pub use faer::{c64, Mat};
pub use grid::{CouplingField, MomentumGrid, PhotonField};
pub use quasifree::{QuasifreeState, SqueezeKernel};

/// Real 3-vector.
pub type Vec3 = [f64; 3];

pub(crate) fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
