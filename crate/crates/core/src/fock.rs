//! Brute-force fiber Hamiltonian on a truncated Fock space over a few modes.
//!
//! Occupation states with total photon number at most `nmax` span the space.
//! Operators are dense complex matrices and exponentials are taken with
//! [`linalg::expm`](crate::linalg::expm), so this is only meant for validation
//! on grids of two to four nodes.

use std::collections::HashMap;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{MomentumGrid, PhotonField};
use crate::linalg;
use crate::quasifree::SqueezeKernel;
use crate::Vec3;

pub const MAX_MODES: usize = 4;
pub const MAX_PHOTONS: usize = 10;

#[derive(Debug, Clone)]
pub struct FockContext {
    modes: usize,
    nmax: usize,
    basis: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    ladder: Vec<Mat<c64>>,
}

/// Occupations of `d` modes summing to `n`, first mode descending.
fn compositions(d: usize, n: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in (0..=n).rev() {
        for mut rest in compositions(d - 1, n - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

pub fn build_fock(d: usize, nmax: usize) -> Result<FockContext> {
    if d == 0 || d > MAX_MODES || nmax > MAX_PHOTONS {
        return Err(Error::Parameter(format!(
            "Fock space over {d} modes with cutoff {nmax} is outside 1..={MAX_MODES} modes, cutoff <= {MAX_PHOTONS}"
        )));
    }
    let basis: Vec<Vec<usize>> = (0..=nmax).flat_map(|n| compositions(d, n)).collect();
    let index: HashMap<Vec<usize>, usize> = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
    let dim = basis.len();
    let ladder = (0..d)
        .map(|i| {
            let mut a = Mat::<c64>::zeros(dim, dim);
            for (col, occ) in basis.iter().enumerate() {
                if occ[i] > 0 {
                    let mut lower = occ.clone();
                    lower[i] -= 1;
                    a[(index[&lower], col)] = c64::new((occ[i] as f64).sqrt(), 0.0);
                }
            }
            a
        })
        .collect();
    Ok(FockContext { modes: d, nmax, basis, index, ladder })
}

impl FockContext {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn occupation(&self, i: usize) -> &[usize] {
        &self.basis[i]
    }

    pub fn index_of(&self, occ: &[usize]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn annihilation(&self, i: usize) -> &Mat<c64> {
        &self.ladder[i]
    }

    pub fn creation(&self, i: usize) -> Mat<c64> {
        self.ladder[i].adjoint().to_owned()
    }

    pub fn identity(&self) -> Mat<c64> {
        Mat::identity(self.dim(), self.dim())
    }

    pub fn vacuum(&self) -> Mat<c64> {
        let mut v = Mat::zeros(self.dim(), 1);
        v[(0, 0)] = c64::new(1.0, 0.0);
        v
    }

    /// Rows and columns whose total occupancy is below the cutoff, where the
    /// truncated ladder operators still satisfy the canonical commutation relations.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.basis[i].iter().sum::<usize>() < self.nmax).collect()
    }

    /// `Σ_a coef_a · op_a` with `op_a` a function of the mode index.
    fn combine(&self, coef: impl Fn(usize) -> c64, op: impl Fn(usize) -> Mat<c64>) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.dim(), self.dim());
        for a in 0..self.modes {
            let c = coef(a);
            if c != c64::new(0.0, 0.0) {
                m += op(a) * faer::Scale(c);
            }
        }
        m
    }

    /// `Σ_a n_a |k_a|`-type diagonal operator `Σ_a w_a a_a† a_a`.
    pub fn number_weighted(&self, w: &[f64]) -> Mat<c64> {
        let d: Vec<f64> = self.basis.iter().map(|occ| occ.iter().zip(w).map(|(&n, w)| n as f64 * w).sum()).collect();
        linalg::diag(&d)
    }

    /// Field operator `Φ(z) = (a†(z) + a(z))/√2` with `a†(z) = Σ z_a a_a†`.
    pub fn field(&self, z: &[c64]) -> Mat<c64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let up = self.combine(|a| z[a] * s, |a| self.creation(a));
        let down = self.combine(|a| z[a].conj() * s, |a| self.ladder[a].clone());
        up + down
    }

    /// Weyl operator `W(z) = exp(iΦ(z))`.
    pub fn weyl(&self, z: &[c64]) -> Mat<c64> {
        linalg::expm(&(self.field(z) * faer::Scale(c64::new(0.0, 1.0))))
    }

    /// `exp(½ Σ_ab (r_ab a_a† a_b† − conj(r_ab) a_a a_b))`.
    ///
    /// This sign makes the pair amplitude `⟨a_a a_b⟩` of the squeezed vacuum
    /// equal to the `t` produced by the squeeze-kernel parametrization.
    pub fn squeeze(&self, r: &Mat<c64>) -> Mat<c64> {
        let n = self.dim();
        let mut gen = Mat::<c64>::zeros(n, n);
        for a in 0..self.modes {
            let cr_a = self.creation(a);
            for b in 0..self.modes {
                let rab = r[(a, b)];
                if rab == c64::new(0.0, 0.0) {
                    continue;
                }
                gen += &cr_a * self.creation(b) * faer::Scale(rab * 0.5);
                gen -= &self.ladder[a] * &self.ladder[b] * faer::Scale(rab.conj() * 0.5);
            }
        }
        linalg::expm(&gen)
    }
}

fn check_grid(ctx: &FockContext, grid: &MomentumGrid) -> Result<()> {
    if grid.len() != ctx.modes {
        return Err(Error::Parameter(format!(
            "grid has {} nodes but the Fock space has {} modes",
            grid.len(),
            ctx.modes
        )));
    }
    Ok(())
}

/// `½(P_f + A(0) − p)² + H_f` with the square formed by matrix products.
pub fn hamiltonian(ctx: &FockContext, grid: &MomentumGrid, g: f64, p: Vec3) -> Result<Mat<c64>> {
    check_grid(ctx, grid)?;
    let cf = grid.coupling_field(g);
    let n = ctx.dim();
    let kabs: Vec<f64> = (0..grid.len()).map(|a| grid.kabs(a)).collect();
    let mut h = ctx.number_weighted(&kabs);
    for j in 0..3 {
        let kj: Vec<f64> = (0..grid.len()).map(|a| grid.k(a)[j]).collect();
        let mut v = ctx.number_weighted(&kj);
        v += ctx.combine(|a| c64::new(cf.at(j, a), 0.0), |a| &ctx.ladder[a] + ctx.creation(a));
        v -= Mat::<c64>::identity(n, n) * faer::Scale(c64::new(p[j], 0.0));
        h += &v * &v * faer::Scale(c64::new(0.5, 0.0));
    }
    Ok(h)
}

/// `W(−i√2 f) S(r) Ω`, i.e. the displaced squeezed vacuum with `⟨a⟩ = f`.
pub fn quasifree_vector(ctx: &FockContext, f: &PhotonField, r: &SqueezeKernel) -> Result<Mat<c64>> {
    if f.len() != ctx.modes || r.dim() != ctx.modes {
        return Err(Error::Parameter(format!(
            "state over {} modes does not fit a Fock space over {} modes",
            f.len(),
            ctx.modes
        )));
    }
    let z: Vec<c64> = f.0.iter().map(|x| x * c64::new(0.0, -std::f64::consts::SQRT_2)).collect();
    let psi = ctx.weyl(&z) * ctx.squeeze(&r.0) * ctx.vacuum();
    let nrm = psi.norm_l2();
    Ok(psi * faer::Scale(c64::new(1.0 / nrm, 0.0)))
}

pub fn expectation(op: &Mat<c64>, psi: &Mat<c64>) -> c64 {
    (psi.adjoint() * op * psi)[(0, 0)]
}

/// `⟨Ψ|H_{g,p}|Ψ⟩` for the quasifree vector of `(f, r)`.
pub fn oracle_energy(
    ctx: &FockContext,
    grid: &MomentumGrid,
    g: f64,
    p: Vec3,
    f: &PhotonField,
    r: &SqueezeKernel,
) -> Result<f64> {
    let h = hamiltonian(ctx, grid, g, p)?;
    let psi = quasifree_vector(ctx, f, r)?;
    Ok(expectation(&h, &psi).re)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub nmax: usize,
    pub dim: usize,
    pub oracle: f64,
    pub functional: f64,
    pub rel_error: f64,
}

/// Oracle energies for increasing cutoffs against the closed-form functional.
pub fn agreement_table(
    grid: &MomentumGrid,
    g: f64,
    p: Vec3,
    f: &PhotonField,
    r: &SqueezeKernel,
    cutoffs: &[usize],
) -> Result<Vec<AgreementRow>> {
    let functional = crate::energy::Fiber::new(grid, g, p).energy_squeeze(f, r)?;
    cutoffs
        .iter()
        .map(|&nmax| {
            let ctx = build_fock(grid.len(), nmax)?;
            let oracle = oracle_energy(&ctx, grid, g, p, f, r)?;
            Ok(AgreementRow {
                nmax,
                dim: ctx.dim(),
                oracle,
                functional,
                rel_error: (oracle - functional).abs() / oracle.abs(),
            })
        })
        .collect()
}
