//! Discretization of the photon momentum shell `σ ≤ |k| ≤ Λ` with two
//! transverse polarizations, and the coupling field built on it.
//!
//! Fields are stored in weight-orthonormalized coordinates `x_a = √w_a f(k_a, τ_a)`,
//! so inner products and traces are plain sums over nodes.

use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_on, SphericalRule};
use crate::{cross3, dot3, norm3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    Plus,
    Minus,
}

/// Transverse polarization vectors completing `k̂` to a right-handed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub plus: Vec3,
    pub minus: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub k: Vec3,
    pub tau: Polarization,
    pub weight: f64,
    pub frame: Frame,
    /// Index of the spatial point; the two polarizations at one `k` share it.
    pub point: usize,
}

impl Node {
    pub fn kabs(&self) -> f64 {
        norm3(&self.k)
    }

    pub fn khat(&self) -> Vec3 {
        let n = self.kabs();
        [self.k[0] / n, self.k[1] / n, self.k[2] / n]
    }

    /// The polarization vector `ε_τ(k)`.
    pub fn epsilon(&self) -> Vec3 {
        match self.tau {
            Polarization::Plus => self.frame.plus,
            Polarization::Minus => self.frame.minus,
        }
    }
}

/// Quadrature nodes on the shell, one per (momentum, polarization) pair.
#[derive(Debug, Clone)]
pub struct MomentumGrid {
    sigma: f64,
    cutoff: f64,
    nodes: Vec<Node>,
}

/// Right-handed transverse frame for a unit vector: `ε₊ ∝ ẑ × k̂` (or
/// `x̂ × k̂` near the poles) and `ε₋ = k̂ × ε₊`.
pub fn polarization_frame(khat: &Vec3) -> Result<Frame> {
    let n = norm3(khat);
    if !n.is_finite() || (n - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("polarization frame needs a unit vector, got norm {n}")));
    }
    let mut plus = cross3(&[0.0, 0.0, 1.0], khat);
    if norm3(&plus) < 1e-8 {
        plus = cross3(&[1.0, 0.0, 0.0], khat);
    }
    let np = norm3(&plus);
    let plus = [plus[0] / np, plus[1] / np, plus[2] / np];
    let minus = cross3(khat, &plus);
    Ok(Frame { plus, minus })
}

/// Closed form of `‖G‖² = ∫ 2g²/|k| d³k` over the shell: `4πg²(Λ² − σ²)`.
pub fn analytic_g_norm2(g: f64, sigma: f64, cutoff: f64) -> f64 {
    4.0 * PI * g * g * (cutoff * cutoff - sigma * sigma)
}

impl MomentumGrid {
    /// Product rule: Gauss–Legendre in the radius (with `r²` in the weights)
    /// times a spherical rule with `n_angular` points, both polarizations.
    pub fn build(sigma: f64, cutoff: f64, n_radial: usize, n_angular: usize) -> Result<Self> {
        check_shell(sigma, cutoff)?;
        if n_radial < 2 {
            return Err(Error::Parameter(format!("n_radial must be at least 2, got {n_radial}")));
        }
        let rule = SphericalRule::from_size(n_angular)?;
        let (radii, rw) = gauss_legendre_on(sigma, cutoff, n_radial);
        let mut nodes = Vec::with_capacity(2 * n_radial * rule.len());
        let mut point = 0;
        for (r, wr) in radii.iter().zip(&rw) {
            for (dir, wa) in rule.points.iter().zip(&rule.weights) {
                let frame = polarization_frame(dir)?;
                let k = [r * dir[0], r * dir[1], r * dir[2]];
                let weight = wr * r * r * 4.0 * PI * wa;
                for tau in [Polarization::Plus, Polarization::Minus] {
                    nodes.push(Node { k, tau, weight, frame, point });
                }
                point += 1;
            }
        }
        Ok(Self { sigma, cutoff, nodes })
    }

    /// Grid from explicit nodes; validates the shell and the frames.
    pub fn from_nodes(sigma: f64, cutoff: f64, nodes: Vec<Node>) -> Result<Self> {
        check_shell(sigma, cutoff)?;
        for (a, n) in nodes.iter().enumerate() {
            let kk = n.kabs();
            if !(kk > 0.0 && kk >= sigma - 1e-12 && kk <= cutoff + 1e-12) {
                return Err(Error::Parameter(format!("node {a} has |k| = {kk} outside the shell")));
            }
            if !(n.weight > 0.0 && n.weight.is_finite()) {
                return Err(Error::Parameter(format!("node {a} has non-positive weight")));
            }
            let kh = n.khat();
            let f = &n.frame;
            let checks = [
                dot3(&f.plus, &f.minus),
                dot3(&f.plus, &kh),
                dot3(&f.minus, &kh),
                dot3(&f.plus, &f.plus) - 1.0,
                dot3(&f.minus, &f.minus) - 1.0,
                dot3(&cross3(&f.plus, &f.minus), &kh) - 1.0,
            ];
            if checks.iter().any(|c| c.abs() > 1e-10) {
                return Err(Error::Parameter(format!("node {a} has an invalid polarization frame")));
            }
        }
        Ok(Self { sigma, cutoff, nodes })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn k(&self, a: usize) -> Vec3 {
        self.nodes[a].k
    }

    pub fn kabs(&self, a: usize) -> f64 {
        self.nodes[a].kabs()
    }

    pub fn weight_sum(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Number of distinct spatial points.
    pub fn point_count(&self) -> usize {
        self.nodes.iter().map(|n| n.point + 1).max().unwrap_or(0)
    }

    /// Nodes selected by `indices`, with weights rescaled so their sum equals
    /// the full grid's.
    pub fn subgrid(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() || indices.iter().any(|&i| i >= self.len()) {
            return Err(Error::Parameter("subgrid indices out of range".into()));
        }
        let picked: Vec<Node> = indices.iter().map(|&i| self.nodes[i].clone()).collect();
        let scale = self.weight_sum() / picked.iter().map(|n| n.weight).sum::<f64>();
        let nodes = picked
            .into_iter()
            .map(|mut n| {
                n.weight *= scale;
                n
            })
            .collect();
        Ok(Self { sigma: self.sigma, cutoff: self.cutoff, nodes })
    }

    /// Rotates the transverse pair at each spatial point by the given angle,
    /// one angle per point. Both polarizations at a point rotate together.
    pub fn rotate_frames(&self, angles: &[f64]) -> Result<Self> {
        if angles.len() < self.point_count() {
            return Err(Error::Parameter(format!(
                "need {} rotation angles, got {}",
                self.point_count(),
                angles.len()
            )));
        }
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let (s, c) = angles[n.point].sin_cos();
                let f = n.frame;
                let plus = std::array::from_fn(|j| c * f.plus[j] + s * f.minus[j]);
                let minus = std::array::from_fn(|j| -s * f.plus[j] + c * f.minus[j]);
                Node { frame: Frame { plus, minus }, ..n.clone() }
            })
            .collect();
        Ok(Self { sigma: self.sigma, cutoff: self.cutoff, nodes })
    }

    /// `G_j(a) = √w_a · g · |k_a|^{-1/2} · ε_τ(k_a)_j`.
    pub fn coupling_field(&self, g: f64) -> CouplingField {
        let components = std::array::from_fn(|j| {
            PhotonField(
                self.nodes
                    .iter()
                    .map(|n| c64::new(n.weight.sqrt() * g / n.kabs().sqrt() * n.epsilon()[j], 0.0))
                    .collect(),
            )
        });
        CouplingField { components, g }
    }
}

fn check_shell(sigma: f64, cutoff: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be finite and non-negative, got {sigma}")));
    }
    if !(cutoff > sigma && cutoff.is_finite()) {
        return Err(Error::Parameter(format!("sigma < cutoff required, got sigma={sigma}, cutoff={cutoff}")));
    }
    Ok(())
}

/// A one-photon vector in orthonormalized node coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonField(pub Vec<c64>);

impl PhotonField {
    pub fn zeros(n: usize) -> Self {
        Self(vec![c64::new(0.0, 0.0); n])
    }

    pub fn from_real(v: &[f64]) -> Self {
        Self(v.iter().map(|&x| c64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ conj(self_a) other_a`.
    pub fn dot(&self, other: &PhotonField) -> c64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `Σ_a d_a |x_a|²` for a diagonal weight `d`.
    pub fn weighted_norm_sqr(&self, d: &[f64]) -> f64 {
        self.0.iter().zip(d).map(|(a, w)| w * a.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|a| a * s).collect())
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &PhotonField) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b * s).collect())
    }

    pub fn sub(&self, other: &PhotonField) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn imag_norm(&self) -> f64 {
        self.0.iter().map(|a| a.im * a.im).sum::<f64>().sqrt()
    }
}

/// The three Cartesian components of the coupling `g ε_τ(k) |k|^{-1/2}`.
#[derive(Debug, Clone)]
pub struct CouplingField {
    pub components: [PhotonField; 3],
    pub g: f64,
}

impl CouplingField {
    /// Real value `G_j(a)`.
    pub fn at(&self, j: usize, a: usize) -> f64 {
        self.components[j].0[a].re
    }

    /// `Σ_j ‖G_j‖²`.
    pub fn norm2(&self) -> f64 {
        self.components.iter().map(PhotonField::norm_sqr).sum()
    }

    /// `u·G` as a photon field.
    pub fn dot_vec(&self, u: &Vec3) -> PhotonField {
        let n = self.components[0].len();
        PhotonField((0..n).map(|a| c64::new((0..3).map(|j| u[j] * self.at(j, a)).sum(), 0.0)).collect())
    }
}
