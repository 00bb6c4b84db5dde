//! The quasifree energy functional of the fiber Hamiltonian
//! `H = ½(P_f + A(0) − p)² + H_f`, its derivatives and its positivity groups.
//!
//! With `φ_j = G_j + K_j f` and `c_j = Tr[γK_j] + f*K_j f + 2Re(f*G_j) − p_j`:
//!
//! ```text
//! E = ½Σc_j² + ½(Tr[γKγK] + Σ|t_ab|² k_a·k_b + Tr[|K|²γ])
//!   + ½Σ_j(2Re Σ conj(t_ab) φ_j(a) φ_j(b) + φ_j*(2γ+1)φ_j) + Tr[γ|K|] + f*|K|f
//! ```

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CouplingField, MomentumGrid, PhotonField};
use crate::linalg;
use crate::quasifree::{self, QuasifreeState, SqueezeKernel, Takagi};
use crate::{dot3, Vec3};

/// The functional split into the groups whose signs the theory controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// `Σ_j c_j²`.
    pub kinetic_square: f64,
    /// `Tr[γKγK] + Σ|t_ab|² k_a·k_b + Tr[|K|²γ]`.
    pub field_quadratic: f64,
    /// `Σ_j (2Re Σ conj(t)φ_jφ_j + φ_j*(2γ+1)φ_j)`.
    pub pairing_group: f64,
    /// `Tr[γ|K|] + f*|K|f`.
    pub photon_energy: f64,
    /// Size of the discarded imaginary parts of the trace expressions.
    pub imag_residue: f64,
}

/// Positivity groups with the per-component pairing bound margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityTerms {
    pub breakdown: EnergyBreakdown,
    /// `field_quadratic + Σ_j Tr[γK_j]²`, non-negative for admissible states.
    pub field_group: f64,
    /// `φ_j*(2γ+1)φ_j − |2Re Σ conj(t)φ_jφ_j|` per component.
    pub pairing_margin: [f64; 3],
}

/// One fiber: grid, coupling constant and total momentum, with cached
/// diagonal multiplication operators.
#[derive(Debug, Clone)]
pub struct Fiber {
    grid: MomentumGrid,
    g: f64,
    p: Vec3,
    coupling: CouplingField,
    k: Vec<Vec3>,
    kabs: Vec<f64>,
    gr: [Vec<f64>; 3],
}

/// Derivatives of `E(f, γ, t)`:
/// `dE = 2Re⟨df_wirtinger, δf⟩ + Re Tr[d_gamma δγ] + Re Σ conj(d_pair) δt`.
#[derive(Debug, Clone)]
pub struct StateDerivatives {
    pub df_wirtinger: PhotonField,
    pub d_gamma: Mat<c64>,
    pub d_pair: Mat<c64>,
    pub u: Vec3,
}

fn czero() -> c64 {
    c64::new(0.0, 0.0)
}

impl Fiber {
    pub fn new(grid: &MomentumGrid, g: f64, p: Vec3) -> Self {
        let coupling = grid.coupling_field(g);
        let k = (0..grid.len()).map(|a| grid.k(a)).collect();
        let kabs = (0..grid.len()).map(|a| grid.kabs(a)).collect();
        let gr = std::array::from_fn(|j| coupling.components[j].0.iter().map(|z| z.re).collect());
        Self { grid: grid.clone(), g, p, coupling, k, kabs, gr }
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn p(&self) -> Vec3 {
        self.p
    }

    pub fn coupling(&self) -> &CouplingField {
        &self.coupling
    }

    pub fn n(&self) -> usize {
        self.kabs.len()
    }

    pub fn k(&self, a: usize) -> Vec3 {
        self.k[a]
    }

    pub fn kabs(&self) -> &[f64] {
        &self.kabs
    }

    pub(crate) fn g_comp(&self, j: usize) -> &[f64] {
        &self.gr[j]
    }

    /// Same fiber with another total momentum.
    pub fn with_momentum(&self, p: Vec3) -> Self {
        Self { p, ..self.clone() }
    }

    /// `½|p|² + ½‖G‖²`.
    pub fn vacuum_energy(&self) -> f64 {
        0.5 * dot3(&self.p, &self.p) + 0.5 * self.coupling.norm2()
    }

    /// `½|k|² + |k|` at each node.
    pub fn kinetic_diag(&self) -> Vec<f64> {
        self.kabs.iter().map(|k| 0.5 * k * k + k).collect()
    }

    /// `½|k|² + |k| − k·u` at each node.
    pub fn m0_diag(&self, u: &Vec3) -> Vec<f64> {
        self.kabs
            .iter()
            .zip(&self.k)
            .map(|(ka, kv)| 0.5 * ka * ka + ka - dot3(kv, u))
            .collect()
    }

    /// `φ_j = G_j + K_j f`.
    pub fn phi(&self, f: &PhotonField) -> [Vec<c64>; 3] {
        std::array::from_fn(|j| {
            f.0.iter()
                .enumerate()
                .map(|(a, fa)| c64::new(self.gr[j][a], 0.0) + fa * self.k[a][j])
                .collect()
        })
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.n() {
            return Err(Error::Parameter(format!("state has {n} modes, grid has {}", self.n())));
        }
        Ok(())
    }

    /// `u = p − Tr[γk] − f*kf − 2Re(f*G)`.
    pub fn dressed_momentum(&self, f: &PhotonField, gamma: Option<&Mat<c64>>) -> Vec3 {
        std::array::from_fn(|j| {
            let mut s = 0.0;
            for a in 0..self.n() {
                let fa = f.0[a];
                s += fa.norm_sqr() * self.k[a][j] + 2.0 * fa.re * self.gr[j][a];
                if let Some(gm) = gamma {
                    s += gm[(a, a)].re * self.k[a][j];
                }
            }
            self.p[j] - s
        })
    }

    pub fn energy(&self, state: &QuasifreeState) -> Result<EnergyBreakdown> {
        let n = state.dim();
        self.check_dim(n)?;
        if state.gamma.nrows() != n || state.t.nrows() != n {
            return Err(Error::Parameter("gamma/t dimensions differ from f".into()));
        }
        Ok(self.breakdown(state))
    }

    fn breakdown(&self, state: &QuasifreeState) -> EnergyBreakdown {
        let n = self.n();
        let (f, gamma, t) = (&state.f, &state.gamma, &state.t);
        let u = self.dressed_momentum(f, Some(gamma));
        let kinetic_square: f64 = u.iter().map(|c| c * c).sum();
        let phi = self.phi(f);

        let mut imag = 0.0;
        let mut fq = czero();
        let mut pair = czero();
        let mut diag_terms = 0.0;
        for b in 0..n {
            for a in 0..n {
                let w = dot3(&self.k[a], &self.k[b]);
                fq += gamma[(a, b)] * gamma[(b, a)] * w + t[(a, b)].conj() * t[(a, b)] * w;
                let mut pp = czero();
                let mut pg = czero();
                for ph in &phi {
                    pp += ph[a] * ph[b];
                    pg += ph[a].conj() * ph[b];
                }
                pair += t[(a, b)].conj() * pp * 2.0 + gamma[(a, b)] * pg * 2.0;
            }
            let gbb = gamma[(b, b)];
            imag += gbb.im.abs();
            let kb = self.kabs[b];
            diag_terms += gbb.re * kb;
            fq += gbb * (kb * kb);
            for ph in &phi {
                pair += c64::new(ph[b].norm_sqr(), 0.0);
            }
        }
        // 2Re Σ conj(t)φφ: only the real part of the accumulated pairing sum counts.
        let pairing_group = pair.re;
        imag += fq.im.abs();
        let field_quadratic = fq.re;
        let photon_energy = diag_terms + f.weighted_norm_sqr(&self.kabs);
        let total = 0.5 * (kinetic_square + field_quadratic + pairing_group) + photon_energy;
        EnergyBreakdown { total, kinetic_square, field_quadratic, pairing_group, photon_energy, imag_residue: imag }
    }

    /// Energy of the coherent state `(f, 0, 0)`:
    /// `½‖G‖² + ½|f*kf + 2Re(f*G) − p|² + f*(½|k|² + |k|)f`.
    pub fn energy_coherent(&self, f: &PhotonField) -> f64 {
        let u = self.dressed_momentum(f, None);
        0.5 * self.coupling.norm2() + 0.5 * dot3(&u, &u) + f.weighted_norm_sqr(&self.kinetic_diag())
    }

    /// Wirtinger derivative `∂E/∂f*` of the coherent energy: `M₀(u)f − u·G`.
    pub fn grad_coherent(&self, f: &PhotonField) -> PhotonField {
        let u = self.dressed_momentum(f, None);
        let m0 = self.m0_diag(&u);
        PhotonField(
            (0..self.n())
                .map(|a| f.0[a] * m0[a] - c64::new((0..3).map(|j| u[j] * self.gr[j][a]).sum(), 0.0))
                .collect(),
        )
    }

    /// Partial derivatives of `E(f, γ, t)` with `γ` and `t` independent.
    pub fn derivatives(&self, state: &QuasifreeState) -> StateDerivatives {
        let n = self.n();
        let (f, gamma, t) = (&state.f, &state.gamma, &state.t);
        let u = self.dressed_momentum(f, Some(gamma));
        let phi = self.phi(f);
        let m0 = self.m0_diag(&u);
        let d_gamma = Mat::from_fn(n, n, |a, b| {
            let mut v = gamma[(a, b)] * dot3(&self.k[a], &self.k[b]);
            for ph in &phi {
                v += ph[a] * ph[b].conj();
            }
            if a == b {
                v += m0[a];
            }
            v
        });
        let d_pair = Mat::from_fn(n, n, |a, b| {
            let mut v = t[(a, b)] * dot3(&self.k[a], &self.k[b]);
            for ph in &phi {
                v += ph[a] * ph[b];
            }
            v
        });
        // ∂E/∂f* = −u·φ + Σ_j K_j t conj(φ_j) + Σ_j K_j(γ + ½)φ_j + |K| f
        let mut df = vec![czero(); n];
        for (j, ph) in phi.iter().enumerate() {
            let phc: Vec<c64> = ph.iter().map(|z| z.conj()).collect();
            for a in 0..n {
                let mut tv = czero();
                let mut gv = czero();
                for b in 0..n {
                    tv += t[(a, b)] * phc[b];
                    gv += gamma[(a, b)] * ph[b];
                }
                let kaj = self.k[a][j];
                df[a] += -ph[a] * u[j] + (tv + gv + ph[a] * 0.5) * kaj;
            }
        }
        for a in 0..n {
            df[a] += f.0[a] * self.kabs[a];
        }
        StateDerivatives { df_wirtinger: PhotonField(df), d_gamma, d_pair, u }
    }

    /// `Ê(f, r)`, the energy of the pure state with displacement `f` and squeeze kernel `r`.
    pub fn energy_squeeze(&self, f: &PhotonField, r: &SqueezeKernel) -> Result<f64> {
        let st = quasifree::state_from_squeeze(f, r)?;
        Ok(self.energy(&st)?.total)
    }

    /// Gradient of `Ê(f, r)` for the real inner product
    /// `⟨(f, r), (f', r')⟩ = Re(f*f') + Re Σ conj(r_ab) r'_ab`; the kernel part is symmetric.
    pub fn grad_squeeze(&self, f: &PhotonField, r: &SqueezeKernel) -> Result<(PhotonField, SqueezeKernel)> {
        self.check_dim(f.len())?;
        let tk = quasifree::takagi(r)?;
        let (_, gf, gr) = self.energy_and_gradient(f, &tk);
        Ok((gf, gr))
    }

    /// Energy and gradient from a precomputed Takagi factorization of `r`.
    pub fn energy_and_gradient(&self, f: &PhotonField, tk: &Takagi) -> (f64, PhotonField, SqueezeKernel) {
        let st = quasifree::state_from_takagi(f.clone(), tk);
        let e = self.breakdown(&st).total;
        let (gf, gr) = self.squeeze_gradient(&st, tk);
        (e, gf, gr)
    }

    /// Gradient of `Ê` at the pure state `st` built from the factorization `tk`.
    pub fn squeeze_gradient(&self, st: &QuasifreeState, tk: &Takagi) -> (PhotonField, SqueezeKernel) {
        let d = self.derivatives(st);
        let gf = d.df_wirtinger.scaled(2.0);
        let gr = kernel_gradient(tk, &d.d_gamma, &d.d_pair);
        (gf, SqueezeKernel(gr))
    }

    /// Energy without dimension checks, for hot loops over valid states.
    pub(crate) fn total_energy(&self, st: &QuasifreeState) -> f64 {
        self.breakdown(st).total
    }

    /// Second-order part of `Ê` at the origin, `½⟨(f, r), ℋ (f, r)⟩`.
    pub fn hessian_form_at_origin(&self, f: &PhotonField, r: &SqueezeKernel) -> f64 {
        let n = self.n();
        let r = &r.0;
        let mut q = 0.0;
        // ½ Σ_j (2Re f*G_j)²
        for j in 0..3 {
            let l: f64 = (0..n).map(|a| 2.0 * f.0[a].re * self.gr[j][a]).sum();
            q += 0.5 * l * l;
        }
        // f*(½|k|² + |k| − k·p) f
        q += f.weighted_norm_sqr(&self.m0_diag(&self.p));
        let rg: [Vec<c64>; 3] = std::array::from_fn(|j| {
            (0..n).map(|a| (0..n).map(|b| r[(a, b)].conj() * self.gr[j][b]).sum()).collect()
        });
        for a in 0..n {
            let ka = self.kabs[a];
            let row: f64 = (0..n).map(|b| r[(a, b)].norm_sqr()).sum();
            // Tr[r r̄ (½|k|² + |k| − k·p)]
            q += row * (0.5 * ka * ka + ka - dot3(&self.k[a], &self.p));
            for b in 0..n {
                let w = dot3(&self.k[a], &self.k[b]);
                q += 0.5 * r[(a, b)].norm_sqr() * w;
                for j in 0..3 {
                    // 2Re Σ conj(r_ab) G_j(a) (K_j f)_b
                    q += 2.0 * (r[(a, b)].conj() * f.0[b] * (self.gr[j][a] * self.k[b][j])).re;
                }
            }
            // Σ_j G_j* r r̄ G_j = Σ_j ‖r̄ G_j‖²
            for rgj in &rg {
                q += rgj[a].norm_sqr();
            }
        }
        q
    }

    pub fn positivity_terms(&self, state: &QuasifreeState) -> Result<PositivityTerms> {
        let breakdown = self.energy(state)?;
        let n = self.n();
        let phi = self.phi(&state.f);
        let tr_gk: [f64; 3] =
            std::array::from_fn(|j| (0..n).map(|a| state.gamma[(a, a)].re * self.k[a][j]).sum());
        let field_group = breakdown.field_quadratic + tr_gk.iter().map(|x| x * x).sum::<f64>();
        let pairing_margin = std::array::from_fn(|j| {
            let ph = &phi[j];
            let mut anomalous = czero();
            let mut normal = 0.0;
            for b in 0..n {
                normal += ph[b].norm_sqr();
                for a in 0..n {
                    anomalous += state.t[(a, b)].conj() * ph[a] * ph[b];
                    normal += 2.0 * (ph[a].conj() * state.gamma[(a, b)] * ph[b]).re;
                }
            }
            normal - (2.0 * anomalous.re).abs()
        });
        Ok(PositivityTerms { breakdown, field_group, pairing_margin })
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// Chain rule from `(γ, t)` to `r` through `γ = U sinh²S U†`, `t = U ½sinh2S Uᵀ`.
///
/// Uses the Hermitian dilation `[[0, r], [r̄, 0]]` whose eigenpairs are `±s`
/// with vectors `[U; ±Ū]/√2`, and the divided differences of `cosh 2x` and
/// `sinh 2x` on that spectrum, written in factored form so coincident or
/// vanishing singular values need no special case.
fn kernel_gradient(tk: &Takagi, d_gamma: &Mat<c64>, d_pair: &Mat<c64>) -> Mat<c64> {
    let u = &tk.u;
    let s = &tk.s;
    let n = s.len();
    let a = &(u.adjoint() * d_gamma) * u;
    let b = &(u.transpose() * d_pair.adjoint()) * u;
    let mut p = Mat::<c64>::zeros(n, n);
    let mut q = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let (sp, sm) = (s[i] + s[j], s[i] - s[j]);
            let (shc_p, shc_m) = (sinhc(sp), sinhc(sm));
            let c_minus = 2.0 * sp.sinh() * shc_m;
            let c_plus = 2.0 * sm.sinh() * shc_p;
            let s_minus = 2.0 * sp.cosh() * shc_m;
            let s_plus = 2.0 * sm.cosh() * shc_p;
            p[(i, j)] = a[(i, j)] * c_minus + b[(i, j)] * s_minus;
            q[(i, j)] = a[(i, j)] * c_plus + b[(i, j)] * s_plus;
        }
    }
    let inner = Mat::from_fn(n, n, |i, j| ((p[(j, i)] + q[(j, i)]).conj() + p[(j, i)] - q[(j, i)]) * 0.25);
    let grad = &(u * &inner) * u.transpose();
    linalg::symmetrize(&grad)
}
