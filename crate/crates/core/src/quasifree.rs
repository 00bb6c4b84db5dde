//! Quasifree states `(f, γ, t)` and the squeeze-kernel parametrization of the
//! pure ones.
//!
//! Conventions for the centered field `b = a − f`: `γ_ab = ⟨b_b† b_a⟩` and
//! `t_ab = ⟨b_a b_b⟩`. An antilinear operator is stored as a symmetric matrix
//! `r` acting by `z ↦ r·conj(z)`.

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{MomentumGrid, PhotonField};
use crate::linalg::{self, eigh, eigh_real, scale_cols, spectral};

/// Hermitian matrix over grid nodes (`γ`, `λ`, `M(γ, u)`).
pub type OneBodyOperator = Mat<c64>;

/// Complex symmetric pairing matrix `t`.
pub type PairField = Mat<c64>;

/// Complex symmetric matrix of an antilinear Hilbert–Schmidt operator.
#[derive(Debug, Clone)]
pub struct SqueezeKernel(pub Mat<c64>);

impl SqueezeKernel {
    pub fn new(r: Mat<c64>) -> Result<Self> {
        check_symmetric(&r, "squeeze kernel")?;
        Ok(Self(r))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm_l2()
    }
}

fn check_symmetric(m: &Mat<c64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Parameter(format!("{what} must be square")));
    }
    let tol = 1e-12 * m.norm_l2().max(1.0);
    let asym = linalg::asymmetry(m);
    if !(asym <= tol) {
        return Err(Error::Parameter(format!("{what} is not symmetric (‖r − rᵀ‖ = {asym:e})")));
    }
    Ok(())
}

/// `(f, γ, t)` with `pure` set when `γ + γ² = t t†`.
#[derive(Debug, Clone)]
pub struct QuasifreeState {
    pub f: PhotonField,
    pub gamma: OneBodyOperator,
    pub t: PairField,
    pub pure: bool,
}

impl QuasifreeState {
    pub fn vacuum(n: usize) -> Self {
        Self::coherent(PhotonField::zeros(n))
    }

    pub fn coherent(f: PhotonField) -> Self {
        let n = f.len();
        Self { f, gamma: Mat::zeros(n, n), t: Mat::zeros(n, n), pure: true }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// `Tr γ`, the expected number of photons in the centered state.
    pub fn photon_number(&self) -> f64 {
        linalg::trace(&self.gamma).re
    }

    /// `Γ = [[γ, t], [t†, 1 + conj(γ)]]`, positive semidefinite for admissible states.
    pub fn generalized_density(&self) -> Mat<c64> {
        let n = self.dim();
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => self.gamma[(i, j)],
            (true, false) => self.t[(i, j - n)],
            (false, true) => self.t[(j, i - n)].conj(),
            (false, false) => {
                let d = if i == j { 1.0 } else { 0.0 };
                self.gamma[(i - n, j - n)].conj() + d
            }
        })
    }
}

/// Takagi factorization `r = U diag(s) Uᵀ`, `U` unitary, `s ≥ 0` descending.
#[derive(Debug, Clone)]
pub struct Takagi {
    pub u: Mat<c64>,
    pub s: Vec<f64>,
}

impl Takagi {
    pub fn reconstruct(&self) -> Mat<c64> {
        &scale_cols(&self.u, &self.s) * self.u.transpose()
    }
}

pub fn takagi(r: &SqueezeKernel) -> Result<Takagi> {
    check_symmetric(&r.0, "squeeze kernel")?;
    takagi_unchecked(&r.0)
}

pub(crate) fn takagi_unchecked(r: &Mat<c64>) -> Result<Takagi> {
    let n = r.nrows();
    let real = (0..n).all(|j| (0..n).all(|i| r[(i, j)].im == 0.0));
    if real {
        takagi_real(r)
    } else {
        takagi_embedded(r)
    }
}

/// Real symmetric input: `r = V Λ Vᵀ`; negative eigenvalues get the column
/// phase `i` so that `s = |λ|`.
fn takagi_real(r: &Mat<c64>) -> Result<Takagi> {
    let n = r.nrows();
    let m = Mat::<f64>::from_fn(n, n, |i, j| r[(i, j)].re);
    let (vals, vecs) = eigh_real(&m)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()));
    let s = order.iter().map(|&k| vals[k].abs()).collect();
    let u = Mat::from_fn(n, n, |i, j| {
        let k = order[j];
        let v = vecs[(i, k)];
        if vals[k] < 0.0 {
            c64::new(0.0, v)
        } else {
            c64::new(v, 0.0)
        }
    });
    Ok(Takagi { u, s })
}

/// General input through the real symmetric embedding `[[X, Y], [Y, −X]]` of
/// `r = X + iY`: an eigenvector `[x; y]` with eigenvalue `s` gives `z = x + iy`
/// with `r conj(z) = s z`. Eigenvalues come in `±s` pairs, so vectors are taken
/// in descending order and kept when they are independent of those already kept.
fn takagi_embedded(r: &Mat<c64>) -> Result<Takagi> {
    let n = r.nrows();
    let emb = Mat::<f64>::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let z = r[(ii, jj)];
        match (bi, bj) {
            (0, 0) => z.re,
            (1, 1) => -z.re,
            _ => z.im,
        }
    });
    let (vals, vecs) = eigh_real(&emb)?;
    let mut cols: Vec<Vec<c64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for k in (0..2 * n).rev() {
        if cols.len() == n {
            break;
        }
        let mut z: Vec<c64> = (0..n).map(|i| c64::new(vecs[(i, k)], vecs[(i + n, k)])).collect();
        for _ in 0..2 {
            for c in &cols {
                let proj: c64 = c.iter().zip(&z).map(|(a, b)| a.conj() * b).sum();
                for (zi, ci) in z.iter_mut().zip(c) {
                    *zi -= proj * ci;
                }
            }
        }
        let norm = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.5 {
            for zi in z.iter_mut() {
                *zi /= norm;
            }
            cols.push(z);
            s.push(vals[k].max(0.0));
        }
    }
    if cols.len() != n {
        return Err(Error::Numeric(format!("takagi: found {} of {n} independent vectors", cols.len())));
    }
    let u = Mat::from_fn(n, n, |i, j| cols[j][i]);
    Ok(Takagi { u, s })
}

/// `γ = U diag(sinh² s) U†`, `t = U diag(½ sinh 2s) Uᵀ`.
pub fn state_from_takagi(f: PhotonField, tk: &Takagi) -> QuasifreeState {
    let sh2: Vec<f64> = tk.s.iter().map(|s| s.sinh().powi(2)).collect();
    let sc: Vec<f64> = tk.s.iter().map(|s| 0.5 * (2.0 * s).sinh()).collect();
    let gamma = linalg::hermitize(&spectral(&tk.u, &sh2));
    let t = linalg::symmetrize(&(&scale_cols(&tk.u, &sc) * tk.u.transpose()));
    QuasifreeState { f, gamma, t, pure: true }
}

/// Pure quasifree state with displacement `f` and squeeze kernel `r`.
pub fn state_from_squeeze(f: &PhotonField, r: &SqueezeKernel) -> Result<QuasifreeState> {
    if f.len() != r.dim() {
        return Err(Error::Parameter("field and kernel dimensions differ".into()));
    }
    let tk = takagi(r)?;
    Ok(state_from_takagi(f.clone(), &tk))
}

/// `‖γ + γ² − t t†‖_F`.
pub fn pureness_residual(gamma: &OneBodyOperator, t: &PairField) -> f64 {
    let lhs = gamma + gamma * gamma;
    let rhs = t * t.adjoint();
    (&lhs - &rhs).norm_l2()
}

/// `γ = ½(√(1 + 4 t t†) − 1)`, the pure-state density for a given pairing.
pub fn gamma_from_pair(t: &PairField) -> Result<OneBodyOperator> {
    let tt = linalg::hermitize(&(t * t.adjoint()));
    let (vals, vecs) = eigh(&tt)?;
    let g: Vec<f64> = vals
        .iter()
        .map(|&h| {
            let h = h.max(0.0);
            2.0 * h / ((1.0 + 4.0 * h).sqrt() + 1.0)
        })
        .collect();
    Ok(linalg::hermitize(&spectral(&vecs, &g)))
}

fn complex_gaussian(rng: &mut ChaCha8Rng, scale: f64) -> c64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    c64::new(a, b) * (scale * std::f64::consts::FRAC_1_SQRT_2)
}

/// Random displacement and symmetric kernel with complex Gaussian entries of
/// standard deviation `scale` (`E|z|² = scale²`), deterministic per seed.
pub fn sample_squeeze(seed: u64, scale: f64, n: usize) -> (PhotonField, SqueezeKernel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = PhotonField((0..n).map(|_| complex_gaussian(&mut rng, scale)).collect());
    let mut r = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let z = complex_gaussian(&mut rng, scale);
            r[(i, j)] = z;
            r[(j, i)] = z;
        }
    }
    (f, SqueezeKernel(r))
}

pub fn sample_pure(seed: u64, scale: f64, grid: &MomentumGrid) -> Result<QuasifreeState> {
    check_scale(scale)?;
    let (f, r) = sample_squeeze(seed, scale, grid.len());
    state_from_squeeze(&f, &r)
}

/// A pure sample with a random non-negative diagonal added to `γ`.
pub fn sample_mixed(seed: u64, scale: f64, grid: &MomentumGrid) -> Result<QuasifreeState> {
    let pure = sample_pure(seed, scale, grid)?;
    Ok(mix(&pure, seed.wrapping_add(0x9e37_79b9_7f4a_7c15), scale))
}

/// Adds `D = diag(scale·x_a²)`, `x_a` standard normal, to `γ`. Since
/// `diag(D, D)` is positive, the generalized density stays positive.
pub fn mix(state: &QuasifreeState, seed: u64, scale: f64) -> QuasifreeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = state.gamma.clone();
    for a in 0..state.dim() {
        let x: f64 = StandardNormal.sample(&mut rng);
        gamma[(a, a)] += c64::new(scale * x * x, 0.0);
    }
    QuasifreeState { f: state.f.clone(), gamma, t: state.t.clone(), pure: false }
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Parameter(format!("sample scale must be positive, got {scale}")));
    }
    Ok(())
}

/// `Π 1/(1 − c_j)`, the trace of the second quantization of an operator
/// with eigenvalues `c_j ∈ [0, 1)`.
pub fn gibbs_trace(c: &[f64]) -> Result<f64> {
    let mut prod = 1.0;
    for &cj in c {
        if !(0.0..1.0).contains(&cj) {
            return Err(Error::Domain(format!("eigenvalue {cj} outside [0, 1)")));
        }
        prod /= 1.0 - cj;
    }
    Ok(prod)
}
