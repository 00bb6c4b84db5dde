//! Minimization over coherent states by a fixed point on the dressed momentum.
//!
//! For fixed `u` the coherent energy is minimized by
//! `Φ_u = u·G / (½|k|² + |k| − k·u)`; self-consistency of `u` gives the map
//! `Ψ(u) = p − Φ_u*kΦ_u − 2Re(Φ_u*G)`, iterated from `u₀ = p`.

use faer::c64;
use serde::Serialize;

use crate::energy::Fiber;
use crate::error::{Error, Result};
use crate::grid::{CouplingField, PhotonField};
use crate::{dot3, norm3, Vec3};

/// Outcome of a coherent solve.
#[derive(Debug, Clone, Serialize)]
pub struct CoherentReport {
    #[serde(skip)]
    pub f: PhotonField,
    pub u: Vec3,
    pub energy: f64,
    pub iterations: usize,
    /// `|Ψ(u) − u|` at the returned `u`.
    pub residual: f64,
    /// Ratios of successive step lengths `|u_{n+1} − u_n| / |u_n − u_{n−1}|`.
    pub contraction_trace: Vec<f64>,
    pub converged: bool,
    /// Set when some measured ratio exceeded one.
    pub contraction_warning: bool,
    /// `f*(½|k|² + |k|)f`, finite even when `σ = 0`.
    pub weighted_norm_sqr: f64,
}

/// `Φ_u(a) = u·G(a) / (½|k_a|² + |k_a| − k_a·u)`.
pub fn phi_u(fiber: &Fiber, u: &Vec3) -> Result<PhotonField> {
    let nu = norm3(u);
    if !(nu < 1.0) {
        return Err(Error::Domain(format!("|u| = {nu} must stay below 1")));
    }
    let d = fiber.m0_diag(u);
    Ok(PhotonField(
        (0..fiber.n())
            .map(|a| {
                let ug: f64 = (0..3).map(|j| u[j] * fiber.g_comp(j)[a]).sum();
                c64::new(ug / d[a], 0.0)
            })
            .collect(),
    ))
}

/// `Ψ(u) = p − Φ_u*kΦ_u − 2Re(Φ_u*G)`.
pub fn psi_map(fiber: &Fiber, u: &Vec3) -> Result<Vec3> {
    let phi = phi_u(fiber, u)?;
    Ok(fiber.dressed_momentum(&phi, None))
}

fn dist(a: &Vec3, b: &Vec3) -> f64 {
    norm3(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

fn finish(fiber: &Fiber, u: Vec3, iterations: usize, residual: f64, trace: Vec<f64>, converged: bool) -> Result<CoherentReport> {
    let f = phi_u(fiber, &u)?;
    let energy = fiber.energy_coherent(&f);
    let weighted_norm_sqr = f.weighted_norm_sqr(&fiber.kinetic_diag());
    let contraction_warning = trace.iter().any(|&r| r > 1.0);
    Ok(CoherentReport { f, u, energy, iterations, residual, contraction_trace: trace, converged, contraction_warning, weighted_norm_sqr })
}

/// Plain Picard iteration `u ← Ψ(u)` from `u₀ = p` until `|Ψ(u) − u| ≤ tol`.
pub fn solve_coherent(fiber: &Fiber, tol: f64, max_iter: usize) -> Result<CoherentReport> {
    let mut u = fiber.p();
    let mut trace = Vec::new();
    let mut prev_step: Option<f64> = None;
    for it in 1..=max_iter {
        let next = psi_map(fiber, &u)?;
        let step = dist(&next, &u);
        if step <= tol {
            return finish(fiber, u, it, step, trace, true);
        }
        if let Some(prev) = prev_step {
            if prev > 1e-13 {
                trace.push(step / prev);
            }
        }
        prev_step = Some(step);
        if norm3(&next) >= 1.0 {
            return Err(Error::Divergence(format!("dressed momentum left the unit ball after {it} steps")));
        }
        u = next;
    }
    let residual = dist(&psi_map(fiber, &u)?, &u);
    finish(fiber, u, max_iter, residual, trace, residual <= tol)
}

/// Anderson-accelerated variant of [`solve_coherent`] with mixing depth `depth`.
pub fn solve_coherent_anderson(fiber: &Fiber, tol: f64, max_iter: usize, depth: usize) -> Result<CoherentReport> {
    let mut u = fiber.p();
    let mut us: Vec<Vec3> = Vec::new();
    let mut rs: Vec<Vec3> = Vec::new();
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;
    for it in 1..=max_iter {
        let g = psi_map(fiber, &u)?;
        let r = [g[0] - u[0], g[1] - u[1], g[2] - u[2]];
        let res = norm3(&r);
        if res <= tol {
            return finish(fiber, u, it, res, trace, true);
        }
        if let Some(p) = prev {
            if p > 1e-13 {
                trace.push(res / p);
            }
        }
        prev = Some(res);
        us.push(g);
        rs.push(r);
        if rs.len() > depth + 1 {
            us.remove(0);
            rs.remove(0);
        }
        u = anderson_mix(&us, &rs).unwrap_or(g);
        if norm3(&u) >= 1.0 {
            return Err(Error::Divergence(format!("dressed momentum left the unit ball after {it} steps")));
        }
    }
    let residual = dist(&psi_map(fiber, &u)?, &u);
    finish(fiber, u, max_iter, residual, trace, residual <= tol)
}

/// Minimizes `|Σ θ_i r_i|` subject to `Σ θ_i = 1` and returns `Σ θ_i g_i`.
fn anderson_mix(gs: &[Vec3], rs: &[Vec3]) -> Option<Vec3> {
    let m = rs.len();
    if m < 2 {
        return None;
    }
    // Differences against the newest residual, normal equations of size m-1.
    let last = rs[m - 1];
    let d: Vec<Vec3> = rs[..m - 1].iter().map(|r| [r[0] - last[0], r[1] - last[1], r[2] - last[2]]).collect();
    let k = d.len();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = dot3(&d[i], &d[j]);
        }
        b[i] = -dot3(&d[i], &last);
        a[i][i] *= 1.0 + 1e-10;
    }
    let theta = solve_dense(a, b)?;
    let mut out = gs[m - 1];
    for (i, th) in theta.iter().enumerate() {
        for c in 0..3 {
            out[c] += th * (gs[i][c] - gs[m - 1][c]);
        }
    }
    Some(out)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let fct = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= fct * a[col][c];
            }
            b[row] -= fct * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// `(D + factor·Σ_j G_j G_j*)⁻¹ v` through the 3×3 capacitance matrix
/// `I + factor·G*D⁻¹G`.
pub fn rank3_resolvent_apply(diag: &[f64], coupling: &CouplingField, v: &PhotonField, factor: f64) -> Result<PhotonField> {
    let n = diag.len();
    if v.len() != n || coupling.components[0].len() != n {
        return Err(Error::Parameter("resolvent dimensions differ".into()));
    }
    if let Some(a) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Parameter(format!("diagonal entry {a} is not positive")));
    }
    let x0: Vec<c64> = v.0.iter().zip(diag).map(|(vi, d)| vi / d).collect();
    if factor == 0.0 {
        return Ok(PhotonField(x0));
    }
    let mut cap = vec![vec![0.0; 3]; 3];
    for (i, row) in cap.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            let s: f64 = (0..n).map(|a| coupling.at(i, a) * coupling.at(j, a) / diag[a]).sum();
            *c = factor * s + if i == j { 1.0 } else { 0.0 };
        }
    }
    let rhs: Vec<c64> = (0..3).map(|j| (0..n).map(|a| x0[a] * coupling.at(j, a)).sum()).collect();
    let yr = solve_dense(cap.clone(), rhs.iter().map(|z| z.re).collect())
        .ok_or_else(|| Error::Numeric("singular capacitance matrix".into()))?;
    let yi = solve_dense(cap, rhs.iter().map(|z| z.im).collect())
        .ok_or_else(|| Error::Numeric("singular capacitance matrix".into()))?;
    Ok(PhotonField(
        (0..n)
            .map(|a| {
                let gy: c64 = (0..3).map(|j| c64::new(yr[j], yi[j]) * coupling.at(j, a)).sum();
                x0[a] - gy * (factor / diag[a])
            })
            .collect(),
    ))
}

/// `E(0) − (p·G)*(½|k|² + |k| + 2G·G*)⁻¹(p·G)`.
pub fn coherent_p2_expansion(fiber: &Fiber) -> Result<f64> {
    let v = fiber.coupling().dot_vec(&fiber.p());
    let x = rank3_resolvent_apply(&fiber.kinetic_diag(), fiber.coupling(), &v, 2.0)?;
    Ok(fiber.vacuum_energy() - v.dot(&x).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MomentumGrid;
    use crate::quasifree::sample_squeeze;

    fn fiber(g: f64, p: Vec3) -> Fiber {
        Fiber::new(&MomentumGrid::build(0.5, 2.0, 4, 14).unwrap(), g, p)
    }

    #[test]
    fn phi_u_examples() {
        let fib = fiber(0.05, [0.0; 3]);
        assert!(phi_u(&fib, &[0.0; 3]).unwrap().norm() == 0.0);
        assert!(matches!(phi_u(&fib, &[1.0, 0.0, 0.0]), Err(Error::Domain(_))));
        let u = [0.0, 0.0, 0.2];
        let phi = phi_u(&fib, &u).unwrap();
        for (a, node) in fib.grid().nodes().iter().enumerate() {
            if node.k[2].abs() < 1e-14 {
                let kk = node.kabs();
                let expected = node.weight.sqrt() * 0.05 / kk.sqrt() * 0.2 * node.epsilon()[2] / (0.5 * kk * kk + kk);
                assert!((phi.0[a].re - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn psi_map_fixed_cases() {
        let p = [0.1, 0.0, -0.05];
        let fib = fiber(0.05, p);
        assert_eq!(psi_map(&fib, &[0.0; 3]).unwrap(), p);
        let free = fiber(0.0, p);
        assert_eq!(psi_map(&free, &[0.3, 0.1, 0.0]).unwrap(), p);
    }

    #[test]
    fn zero_momentum_and_zero_coupling() {
        let fib = fiber(0.05, [0.0; 3]);
        let rep = solve_coherent(&fib, 1e-12, 50).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
        assert!(rep.f.norm() == 0.0);
        assert!((rep.energy - 0.5 * fib.coupling().norm2()).abs() < 1e-15);
        let p = [0.2, 0.1, 0.0];
        let free = fiber(0.0, p);
        let rep = solve_coherent(&free, 1e-12, 50).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.u, p);
        assert!((rep.energy - 0.5 * dot3(&p, &p)).abs() < 1e-16);
    }

    #[test]
    fn fixed_point_properties() {
        let p = [0.1, 0.0, 0.0];
        let fib = fiber(0.05, p);
        let rep = solve_coherent(&fib, 1e-12, 100).unwrap();
        assert!(rep.converged);
        assert!(norm3(&rep.u) <= norm3(&p) + 1e-10);
        assert!(fib.grad_coherent(&rep.f).norm() <= 10.0 * 1e-12);
        // E(f_p) = E(0) − Re(f_p*(u·G)) − ½|u − p|²
        let ug = fib.coupling().dot_vec(&rep.u);
        let du = [rep.u[0] - p[0], rep.u[1] - p[1], rep.u[2] - p[2]];
        let rhs = fib.vacuum_energy() - rep.f.dot(&ug).re - 0.5 * dot3(&du, &du);
        assert!((rep.energy - rhs).abs() < 1e-12);
        assert!(rep.energy < fib.vacuum_energy());
        assert!(rep.contraction_trace.iter().all(|&r| r <= 0.7));
    }

    #[test]
    fn taylor_identity_around_the_minimizer() {
        let p = [0.0, 0.15, 0.1];
        let fib = fiber(0.08, p);
        let rep = solve_coherent(&fib, 1e-13, 100).unwrap();
        let m0 = fib.m0_diag(&rep.u);
        for seed in 0..5 {
            let (h, _) = sample_squeeze(seed, 0.05, fib.n());
            let lhs = fib.energy_coherent(&rep.f.axpy(1.0, &h)) - rep.energy;
            let mut q = [0.0; 3];
            for (j, qj) in q.iter_mut().enumerate() {
                for a in 0..fib.n() {
                    let k = fib.k(a)[j];
                    *qj += h.0[a].norm_sqr() * k + 2.0 * (rep.f.0[a].conj() * h.0[a]).re * k + 2.0 * h.0[a].re * fib.g_comp(j)[a];
                }
            }
            let rhs = h.weighted_norm_sqr(&m0) + 0.5 * dot3(&q, &q);
            assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs(), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn anderson_agrees_with_picard() {
        let fib = fiber(0.1, [0.2, -0.1, 0.05]);
        let a = solve_coherent(&fib, 1e-13, 200).unwrap();
        let b = solve_coherent_anderson(&fib, 1e-13, 200, 2).unwrap();
        assert!(dist(&a.u, &b.u) < 1e-12);
        assert!(b.iterations <= a.iterations);
    }

    #[test]
    fn resolvent_examples() {
        let fib = fiber(0.3, [0.0; 3]);
        let d = fib.kinetic_diag();
        let (v, _) = sample_squeeze(4, 1.0, fib.n());
        let x = rank3_resolvent_apply(&d, fib.coupling(), &v, 0.0).unwrap();
        for a in 0..fib.n() {
            assert!((x.0[a] - v.0[a] / d[a]).norm() < 1e-16);
        }
        let x = rank3_resolvent_apply(&d, fib.coupling(), &v, 2.0).unwrap();
        let mut res = 0.0;
        for a in 0..fib.n() {
            let mut y = x.0[a] * d[a];
            for j in 0..3 {
                let gx: c64 = (0..fib.n()).map(|b| x.0[b] * fib.g_comp(j)[b]).sum();
                y += gx * (2.0 * fib.g_comp(j)[a]);
            }
            res += (y - v.0[a]).norm_sqr();
        }
        assert!(res.sqrt() <= 1e-10 * v.norm());
    }

    #[test]
    fn resolvent_rank_one_matches_sherman_morrison() {
        let fib = fiber(0.3, [0.0; 3]);
        let mut cf = fib.coupling().clone();
        cf.components[1] = PhotonField::zeros(fib.n());
        cf.components[2] = PhotonField::zeros(fib.n());
        let d = fib.kinetic_diag();
        let (v, _) = sample_squeeze(8, 1.0, fib.n());
        let x = rank3_resolvent_apply(&d, &cf, &v, 1.5).unwrap();
        let g = &cf.components[0];
        let dinv_v: Vec<c64> = v.0.iter().zip(&d).map(|(a, b)| a / b).collect();
        let gdv: c64 = (0..fib.n()).map(|a| g.0[a].conj() * dinv_v[a]).sum();
        let gdg: f64 = (0..fib.n()).map(|a| g.0[a].norm_sqr() / d[a]).sum();
        for a in 0..fib.n() {
            let sm = dinv_v[a] - g.0[a] / d[a] * gdv * (1.5 / (1.0 + 1.5 * gdg));
            assert!((sm - x.0[a]).norm() < 1e-14);
        }
    }

    #[test]
    fn p2_expansion_limits() {
        let fib = fiber(0.05, [0.0; 3]);
        assert!((coherent_p2_expansion(&fib).unwrap() - fib.vacuum_energy()).abs() < 1e-16);
        let free = fiber(0.0, [0.1, 0.2, 0.0]);
        assert!((coherent_p2_expansion(&free).unwrap() - 0.025).abs() < 1e-16);
    }
}
