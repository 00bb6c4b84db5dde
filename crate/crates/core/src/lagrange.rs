//! Self-consistent solution of the stationarity equations of the energy on
//! pure quasifree states, with the constraint `γ + γ² = t t†` carried by a
//! Hermitian multiplier `λ`.
//!
//! One sweep updates, in order: the pairing `t` from
//! `Σ_j K_j t K_j + λt + tλᵀ = −Σ_j φ_j φ_jᵀ`, then `γ = ½(√(1 + 4tt†) − 1)`,
//! the dressed momentum `u`, the displacement `f` from `M(γ,u) f = source`,
//! and the multiplier from `(½ + γ)λ + λ(½ + γ) = M(γ,u) + Σ_j φ_j φ_j*`.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use serde::Serialize;

use crate::energy::Fiber;
use crate::error::{Error, Result};
use crate::grid::{MomentumGrid, PhotonField};
use crate::linalg::{self, eigh, re_inner};
use crate::quasifree::{gamma_from_pair, pureness_residual, OneBodyOperator, PairField, QuasifreeState};
use crate::{dot3, norm3, Vec3};

/// Solves `AX + XA = B` for Hermitian positive definite `A`.
pub fn sylvester_solve(a: &Mat<c64>, b: &Mat<c64>) -> Result<Mat<c64>> {
    let (vals, vecs) = eigh(&linalg::hermitize(a))?;
    sylvester_with_basis(&vals, &vecs, b)
}

/// [`sylvester_solve`] with a given eigendecomposition `A = V diag(a) V†`.
pub fn sylvester_with_basis(vals: &[f64], vecs: &Mat<c64>, b: &Mat<c64>) -> Result<Mat<c64>> {
    if let Some(&m) = vals.iter().min_by(|x, y| x.total_cmp(y)) {
        if !(m > 0.0) {
            return Err(Error::Domain(format!("sylvester operator has eigenvalue {m} ≤ 0")));
        }
    }
    let bt = &(vecs.adjoint() * b) * vecs;
    let n = vals.len();
    let xt = Mat::from_fn(n, n, |i, j| bt[(i, j)] / (vals[i] + vals[j]));
    Ok(&(vecs * &xt) * vecs.adjoint())
}

/// Diagnostics from the conjugate-gradient pairing solve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairSolveInfo {
    pub iterations: usize,
    /// Smallest Rayleigh quotient of the search directions, an upper bound
    /// for the smallest eigenvalue of the operator.
    pub min_rayleigh: f64,
    pub relative_residual: f64,
}

fn pair_operator(w: &Mat<f64>, lambda: &Mat<c64>, lambda_t: &Mat<c64>, x: &Mat<c64>) -> Mat<c64> {
    let lx = lambda * x;
    let xl = x * lambda_t;
    let n = x.nrows();
    Mat::from_fn(n, n, |i, j| x[(i, j)] * w[(i, j)] + lx[(i, j)] + xl[(i, j)])
}

/// Solves `Σ_j K_j t K_j + λt + tλᵀ = rhs` on symmetric matrices by
/// Jacobi-preconditioned conjugate gradients in the Frobenius inner product.
pub fn pair_solve(grid: &MomentumGrid, lambda: &OneBodyOperator, rhs: &PairField, tol: f64) -> Result<(PairField, PairSolveInfo)> {
    let n = grid.len();
    if lambda.nrows() != n || rhs.nrows() != n {
        return Err(Error::Parameter("pair solve dimensions differ from the grid".into()));
    }
    let w = Mat::<f64>::from_fn(n, n, |a, b| dot3(&grid.k(a), &grid.k(b)));
    let lambda_t = linalg::transpose(lambda);
    let precond = Mat::<f64>::from_fn(n, n, |a, b| {
        let d = w[(a, b)] + lambda[(a, a)].re + lambda[(b, b)].re;
        if d > 1e-12 {
            1.0 / d
        } else {
            1.0
        }
    });
    let rhs_norm = rhs.norm_l2();
    let mut info = PairSolveInfo { iterations: 0, min_rayleigh: f64::INFINITY, relative_residual: 0.0 };
    let mut x = Mat::<c64>::zeros(n, n);
    if rhs_norm == 0.0 {
        return Ok((x, info));
    }
    let mut r = rhs.clone();
    let apply_pc = |r: &Mat<c64>| Mat::from_fn(n, n, |i, j| r[(i, j)] * precond[(i, j)]);
    let mut z = apply_pc(&r);
    let mut p = z.clone();
    let mut rz = re_inner(&r, &z);
    let max_iter = 20 * n + 200;
    for it in 1..=max_iter {
        let ap = pair_operator(&w, lambda, &lambda_t, &p);
        let pap = re_inner(&p, &ap);
        let pp = re_inner(&p, &p);
        if !(pap > 0.0) {
            return Err(Error::Domain(format!("pairing operator is not positive (curvature {pap:e})")));
        }
        info.min_rayleigh = info.min_rayleigh.min(pap / pp);
        let alpha = rz / pap;
        x = Mat::from_fn(n, n, |i, j| x[(i, j)] + p[(i, j)] * alpha);
        r = Mat::from_fn(n, n, |i, j| r[(i, j)] - ap[(i, j)] * alpha);
        let rel = r.norm_l2() / rhs_norm;
        info.iterations = it;
        info.relative_residual = rel;
        if rel <= tol {
            return Ok((linalg::symmetrize(&x), info));
        }
        z = apply_pc(&r);
        let rz_new = re_inner(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = Mat::from_fn(n, n, |i, j| z[(i, j)] + p[(i, j)] * beta);
    }
    Err(Error::Numeric(format!(
        "pair solve stalled at relative residual {:e} after {max_iter} iterations",
        info.relative_residual
    )))
}

/// Unknowns of the stationarity system.
#[derive(Debug, Clone)]
pub struct LagrangeState {
    pub f: PhotonField,
    pub t: PairField,
    pub gamma: OneBodyOperator,
    pub lambda: OneBodyOperator,
    pub u: Vec3,
}

impl LagrangeState {
    pub fn quasifree(&self) -> QuasifreeState {
        QuasifreeState { f: self.f.clone(), gamma: self.gamma.clone(), t: self.t.clone(), pure: true }
    }
}

/// Norms of the five equation residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ResidualSet {
    pub res_f: f64,
    pub res_alpha: f64,
    pub res_gamma: f64,
    pub res_lambda: f64,
    pub res_u: f64,
}

impl ResidualSet {
    pub fn max(&self) -> f64 {
        [self.res_f, self.res_alpha, self.res_gamma, self.res_lambda, self.res_u]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LagrangeReport {
    #[serde(skip)]
    pub state: LagrangeState,
    pub residuals: ResidualSet,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `|u| < ½` and `‖λ − (½|k|² + |k| − p·k)‖ < σ/2` at the final point.
    pub certified: bool,
    /// Ratios of successive `‖(f, λ)_{n+1} − (f, λ)_n‖`.
    pub contraction_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub photon_number: f64,
}

/// `M(γ, u) = ½|k|² + |k| − k·u + Σ_j K_j γ K_j`.
fn m_operator(fiber: &Fiber, gamma: &Mat<c64>, u: &Vec3) -> Mat<c64> {
    let n = fiber.n();
    let d = fiber.m0_diag(u);
    Mat::from_fn(n, n, |a, b| {
        let v = gamma[(a, b)] * dot3(&fiber.k(a), &fiber.k(b));
        if a == b {
            v + d[a]
        } else {
            v
        }
    })
}

/// `−Σ_j [K_j(γ + ½) − u_j] G_j − Σ_j K_j t conj(φ_j)`.
fn f_source(fiber: &Fiber, gamma: &Mat<c64>, t: &Mat<c64>, u: &Vec3, phi: &[Vec<c64>; 3]) -> Vec<c64> {
    let n = fiber.n();
    let mut out = vec![c64::new(0.0, 0.0); n];
    for j in 0..3 {
        let g = fiber.g_comp(j);
        for a in 0..n {
            let mut gg = c64::new(0.5 * g[a], 0.0);
            let mut tp = c64::new(0.0, 0.0);
            for b in 0..n {
                gg += gamma[(a, b)] * g[b];
                tp += t[(a, b)] * phi[j][b].conj();
            }
            let kaj = fiber.k(a)[j];
            out[a] -= gg * kaj - u[j] * g[a] + tp * kaj;
        }
    }
    out
}

fn pair_source(phi: &[Vec<c64>; 3]) -> Mat<c64> {
    let n = phi[0].len();
    Mat::from_fn(n, n, |a, b| phi.iter().map(|p| p[a] * p[b]).sum())
}

fn lambda_source(m: &Mat<c64>, phi: &[Vec<c64>; 3]) -> Mat<c64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |a, b| m[(a, b)] + phi.iter().map(|p| p[a] * p[b].conj()).sum::<c64>())
}

fn half_plus(gamma: &Mat<c64>) -> Mat<c64> {
    let n = gamma.nrows();
    Mat::from_fn(n, n, |a, b| gamma[(a, b)] + if a == b { 0.5 } else { 0.0 })
}

fn col(v: &[c64]) -> Mat<c64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Residuals of all five equations at a given point.
pub fn residuals(fiber: &Fiber, st: &LagrangeState) -> ResidualSet {
    let n = fiber.n();
    let phi = fiber.phi(&st.f);
    let u_eq = fiber.dressed_momentum(&st.f, Some(&st.gamma));
    let res_u = norm3(&[st.u[0] - u_eq[0], st.u[1] - u_eq[1], st.u[2] - u_eq[2]]);
    let m = m_operator(fiber, &st.gamma, &st.u);
    let mf = &m * col(&st.f.0);
    let src = f_source(fiber, &st.gamma, &st.t, &st.u, &phi);
    let res_f = (0..n).map(|a| (mf[(a, 0)] - src[a]).norm_sqr()).sum::<f64>().sqrt();
    let w = Mat::<f64>::from_fn(n, n, |a, b| dot3(&fiber.k(a), &fiber.k(b)));
    let at = pair_operator(&w, &st.lambda, &linalg::transpose(&st.lambda), &st.t);
    let res_alpha = (&at + pair_source(&phi)).norm_l2();
    let res_gamma = pureness_residual(&st.gamma, &st.t);
    let h = half_plus(&st.gamma);
    let lhs = &h * &st.lambda + &st.lambda * &h;
    let res_lambda = (&lhs - lambda_source(&m, &phi)).norm_l2();
    ResidualSet { res_f, res_alpha, res_gamma, res_lambda, res_u }
}

/// Completes `(f, t, γ)` with `u` from its defining formula and `λ` from the
/// multiplier equation, then evaluates the residuals.
pub fn residuals_at(fiber: &Fiber, f: &PhotonField, t: &PairField, gamma: &OneBodyOperator) -> Result<(LagrangeState, ResidualSet)> {
    let u = fiber.dressed_momentum(f, Some(gamma));
    let m = m_operator(fiber, gamma, &u);
    let lambda = sylvester_solve(&half_plus(gamma), &lambda_source(&m, &fiber.phi(f)))?;
    let st = LagrangeState { f: f.clone(), t: t.clone(), gamma: gamma.clone(), lambda, u };
    let res = residuals(fiber, &st);
    Ok((st, res))
}

/// Reference multiplier `½|k|² + |k| − p·k`.
fn lambda_reference(fiber: &Fiber) -> Mat<c64> {
    linalg::diag(&fiber.m0_diag(&fiber.p()))
}

/// Iterates the sweep from `f = 0`, `λ = ½|k|² + |k| − p·k` until every
/// residual is at most `tol`.
pub fn lagrange_iterate(fiber: &Fiber, tol: f64, max_iter: usize) -> Result<LagrangeReport> {
    let n = fiber.n();
    let grid = fiber.grid().clone();
    let mut f = PhotonField::zeros(n);
    let mut lambda = lambda_reference(fiber);
    let mut contraction_trace = Vec::new();
    let mut residual_trace = Vec::new();
    let mut prev_step: Option<f64> = None;
    let mut last: Option<(LagrangeState, ResidualSet)> = None;
    let inner_tol = (tol * 1e-3).clamp(1e-14, 1e-10);

    for it in 1..=max_iter {
        let phi = fiber.phi(&f);
        let source = pair_source(&phi);
        let rhs = Mat::from_fn(n, n, |a, b| -source[(a, b)]);
        let (t, _) = pair_solve(&grid, &lambda, &rhs, inner_tol)?;
        let gamma = gamma_from_pair(&t)?;
        let u = fiber.dressed_momentum(&f, Some(&gamma));
        let m = m_operator(fiber, &gamma, &u);
        let chol = m.llt(Side::Lower).map_err(|_| {
            Error::Domain(format!("M(γ, u) lost positivity at sweep {it} (|u| = {:.3e})", norm3(&u)))
        })?;
        let src = f_source(fiber, &gamma, &t, &u, &phi);
        let fm = chol.solve(&col(&src));
        let f_new = PhotonField((0..n).map(|a| fm[(a, 0)]).collect());
        let phi_new = fiber.phi(&f_new);
        let lambda_new = linalg::hermitize(&sylvester_solve(&half_plus(&gamma), &lambda_source(&m, &phi_new))?);

        let step = (f_new.sub(&f).norm_sqr() + (&lambda_new - &lambda).norm_l2().powi(2)).sqrt();
        if let Some(prev) = prev_step {
            if prev > 1e-13 {
                contraction_trace.push(step / prev);
            }
        }
        prev_step = Some(step);
        f = f_new;
        lambda = lambda_new;
        let st = LagrangeState { f: f.clone(), t, gamma, lambda: lambda.clone(), u };
        let res = residuals(fiber, &st);
        residual_trace.push(res.max());
        let done = res.max() <= tol;
        last = Some((st, res));
        if done {
            return finish(fiber, last.take().unwrap(), it, true, contraction_trace, residual_trace);
        }
        if !res.max().is_finite() {
            return Err(Error::Divergence(format!("non-finite residual at sweep {it}")));
        }
    }
    match last {
        Some(l) => finish(fiber, l, max_iter, false, contraction_trace, residual_trace),
        None => Err(Error::Parameter("max_iter must be positive".into())),
    }
}

fn finish(
    fiber: &Fiber,
    (state, residuals): (LagrangeState, ResidualSet),
    iterations: usize,
    converged: bool,
    contraction_trace: Vec<f64>,
    residual_trace: Vec<f64>,
) -> Result<LagrangeReport> {
    let qf = state.quasifree();
    let energy = fiber.energy(&qf)?.total;
    let deviation = linalg::op_norm_herm(&(&state.lambda - lambda_reference(fiber)))?;
    let certified = norm3(&state.u) < 0.5 && deviation < 0.5 * fiber.grid().sigma();
    let photon_number = qf.photon_number();
    Ok(LagrangeReport { state, residuals, energy, iterations, converged, certified, contraction_trace, residual_trace, photon_number })
}
