//! Direct minimization of `Ê(f, r)` over displacements and symmetric squeeze
//! kernels, with convexity and coercivity probes.
//!
//! The energy is strictly convex near the origin and coercive for `σ > 0`,
//! so descent from `(0, 0)` with Armijo backtracking reaches the unique
//! minimizer in the small-coupling regime.

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::energy::Fiber;
use crate::error::{Error, Result};
use crate::grid::PhotonField;
use crate::linalg::re_inner;
use crate::quasifree::{sample_squeeze, state_from_takagi, takagi_unchecked, QuasifreeState, SqueezeKernel, Takagi};
use crate::{dot3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Steepest descent in the plain metric.
    Gradient,
    /// Descent preconditioned by the diagonal of the Hessian at the origin.
    Preconditioned,
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub strategy: Strategy,
    /// Random probes per radius when estimating the convexity ball; zero skips it.
    pub ball_samples: usize,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, strategy: Strategy::Preconditioned, ball_samples: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalReport {
    #[serde(skip)]
    pub f: PhotonField,
    #[serde(skip)]
    pub r: SqueezeKernel,
    #[serde(skip)]
    pub state: QuasifreeState,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest probed radius on which the sampled Hessian bound held.
    pub r_estimate: Option<f64>,
    /// Whether `‖(f, r)‖ ≤ r_estimate`; absent when the ball was not probed.
    pub inside_ball: Option<bool>,
    /// `‖G‖² ≤ σ/2`, the smallness condition under which uniqueness is proven.
    pub certified: bool,
    pub energy_trace: Vec<f64>,
    pub u: Vec3,
    pub photon_number: f64,
    /// Norms of the imaginary parts of `f` and `r` at the minimizer.
    pub imag_f: f64,
    pub imag_r: f64,
}

/// A point `(f, r)` of the product space with the real inner product
/// `Re(f*f') + Re Σ conj(r) r'`.
#[derive(Debug, Clone)]
pub struct Point {
    pub f: PhotonField,
    pub r: Mat<c64>,
}

impl Point {
    pub fn zeros(n: usize) -> Self {
        Self { f: PhotonField::zeros(n), r: Mat::zeros(n, n) }
    }

    pub fn norm(&self) -> f64 {
        (self.f.norm_sqr() + self.r.squared_norm_l2()).sqrt()
    }

    pub fn inner(&self, other: &Point) -> f64 {
        self.f.dot(&other.f).re + re_inner(&self.r, &other.r)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Point) -> Point {
        let n = self.r.nrows();
        Point {
            f: self.f.axpy(s, &other.f),
            r: Mat::from_fn(n, n, |i, j| self.r[(i, j)] + other.r[(i, j)] * s),
        }
    }

    pub fn scaled(&self, s: f64) -> Point {
        Point::zeros(self.f.len()).axpy(s, self)
    }

    /// Random direction with unit norm.
    pub fn random_unit(seed: u64, n: usize) -> Point {
        let (f, r) = sample_squeeze(seed, 1.0, n);
        let p = Point { f, r: r.0 };
        let nrm = p.norm();
        p.scaled(1.0 / nrm)
    }
}

/// Diagonal of the Hessian of `Ê` at the origin in the real metric.
struct Preconditioner {
    f: Vec<f64>,
    r: Mat<f64>,
}

impl Preconditioner {
    fn at_origin(fiber: &Fiber) -> Self {
        let n = fiber.n();
        let p = fiber.p();
        let floor = 1e-3 * fiber.grid().sigma().max(1e-3);
        let k = fiber.kabs();
        let f = (0..n)
            .map(|a| (k[a] * k[a] + 2.0 * k[a] - 2.0 * dot3(&fiber.k(a), &p)).max(floor))
            .collect();
        let r = Mat::from_fn(n, n, |a, b| {
            let ka = fiber.k(a);
            let kb = fiber.k(b);
            let s = dot3(&ka, &kb) + 0.5 * k[a] * k[a] + k[a] + 0.5 * k[b] * k[b] + k[b];
            let sum = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]];
            (s - dot3(&sum, &p)).max(floor)
        });
        Self { f, r }
    }

    fn identity(n: usize) -> Self {
        Self { f: vec![1.0; n], r: Mat::from_fn(n, n, |_, _| 1.0) }
    }

    fn apply_inverse(&self, g: &Point) -> Point {
        let n = self.f.len();
        Point {
            f: PhotonField((0..n).map(|a| g.f.0[a] / self.f[a]).collect()),
            r: Mat::from_fn(n, n, |a, b| g.r[(a, b)] / self.r[(a, b)]),
        }
    }
}

struct Evaluated {
    x: Point,
    tk: Takagi,
    state: QuasifreeState,
    energy: f64,
}

fn evaluate(fiber: &Fiber, x: Point) -> Result<Evaluated> {
    let tk = takagi_unchecked(&x.r)?;
    let state = state_from_takagi(x.f.clone(), &tk);
    let energy = fiber.total_energy(&state);
    if !energy.is_finite() {
        return Err(Error::Numeric("energy overflowed along the descent path".into()));
    }
    Ok(Evaluated { x, tk, state, energy })
}

fn gradient(fiber: &Fiber, ev: &Evaluated) -> Point {
    let (gf, gr) = fiber.squeeze_gradient(&ev.state, &ev.tk);
    Point { f: gf, r: gr.0 }
}

/// Minimizes `Ê` starting from `(0, 0)`.
pub fn minimize_quasifree(fiber: &Fiber, opts: &MinimizeOptions) -> Result<VariationalReport> {
    minimize_from(fiber, opts, Point::zeros(fiber.n()))
}

/// Minimizes `Ê` from a given starting point.
pub fn minimize_from(fiber: &Fiber, opts: &MinimizeOptions, start: Point) -> Result<VariationalReport> {
    let sigma = fiber.grid().sigma();
    if !(sigma > 0.0) {
        return Err(Error::Domain("the quasifree minimization needs sigma > 0".into()));
    }
    let n = fiber.n();
    let start = Point { r: crate::linalg::symmetrize(&start.r), ..start };
    let pc = match opts.strategy {
        Strategy::Preconditioned => Preconditioner::at_origin(fiber),
        Strategy::Gradient => Preconditioner::identity(n),
    };
    let mut cur = evaluate(fiber, start)?;
    let mut g = gradient(fiber, &cur);
    let mut trace = vec![cur.energy];
    let mut iterations = 0;
    let mut converged = false;
    // Plain steepest descent has no natural scale; start from the inverse of a
    // Hessian-sized constant and adapt.
    let mut step0 = match opts.strategy {
        Strategy::Preconditioned => 1.0,
        Strategy::Gradient => {
            let kmax = fiber.kabs().iter().fold(0.0_f64, |m, &k| m.max(k));
            1.0 / (2.0 * kmax * kmax + 4.0 * kmax)
        }
    };
    loop {
        let gnorm = g.norm();
        if gnorm <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let d = pc.apply_inverse(&g).scaled(-1.0);
        let slope = g.inner(&d);
        let mut alpha = step0;
        let noise = 64.0 * f64::EPSILON * (cur.energy.abs() + 1.0);
        let mut accepted = None;
        for _ in 0..60 {
            let trial = evaluate(fiber, cur.x.axpy(alpha, &d));
            if let Ok(ev) = trial {
                let predicted = alpha * slope;
                if predicted.abs() >= noise {
                    if ev.energy <= cur.energy + 1e-4 * predicted {
                        let gt = gradient(fiber, &ev);
                        accepted = Some((ev, gt));
                        break;
                    }
                } else {
                    // Energy differences are roundoff here; the directional
                    // derivative still resolves the minimum along `d`.
                    let gt = gradient(fiber, &ev);
                    if gt.inner(&d).abs() <= 0.9 * slope.abs() {
                        accepted = Some((ev, gt));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(Error::Numeric(format!(
                "line search failed at iteration {iterations} (energy {:.16e}, gradient norm {gnorm:e})",
                cur.energy
            )));
        };
        if opts.strategy == Strategy::Gradient {
            step0 = if alpha == step0 { step0 * 2.0 } else { alpha };
        }
        cur = next.0;
        g = next.1;
        trace.push(cur.energy);
    }

    let xnorm = cur.x.norm();
    let (r_estimate, inside_ball) = if opts.ball_samples > 0 {
        let est = estimate_convexity_radius(fiber, xnorm, opts.ball_samples, opts.seed);
        (Some(est), Some(xnorm <= est))
    } else {
        (None, None)
    };
    let u = fiber.dressed_momentum(&cur.state.f, Some(&cur.state.gamma));
    let imag_r = (0..n)
        .map(|j| (0..n).map(|i| cur.x.r[(i, j)].im.powi(2)).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    Ok(VariationalReport {
        imag_f: cur.x.f.imag_norm(),
        imag_r,
        photon_number: cur.state.photon_number(),
        u,
        f: cur.x.f.clone(),
        r: SqueezeKernel(cur.x.r.clone()),
        state: cur.state,
        energy: cur.energy,
        grad_norm: g.norm(),
        iterations,
        converged,
        r_estimate,
        inside_ball,
        certified: fiber.coupling().norm2() <= 0.5 * sigma,
        energy_trace: trace,
    })
}

/// `(Ê(x + hd) + Ê(x − hd) − 2Ê(x)) / 2h²`, the second-order coefficient of
/// `Ê` along `d` at `x`.
pub fn hessian_form_fd(fiber: &Fiber, x: &Point, d: &Point) -> Result<f64> {
    let h = 1e-4 * (1.0 + x.norm());
    let e0 = evaluate(fiber, x.clone())?.energy;
    let ep = evaluate(fiber, x.axpy(h, d))?.energy;
    let em = evaluate(fiber, x.axpy(-h, d))?.energy;
    Ok((ep + em - 2.0 * e0) / (2.0 * h * h))
}

fn random_direction(seed: u64, n: usize, kind: usize) -> Point {
    let mut d = Point::random_unit(seed, n);
    match kind % 3 {
        0 => d.r = Mat::zeros(n, n),
        1 => d.f = PhotonField::zeros(n),
        _ => {}
    }
    let nrm = d.norm();
    d.scaled(1.0 / nrm)
}

/// Unit directions supported on the softest node and on the softest node pair,
/// where the diagonal of the Hessian at the origin is smallest.
fn softest_directions(fiber: &Fiber) -> [Point; 2] {
    let n = fiber.n();
    let pc = Preconditioner::at_origin(fiber);
    let a = (0..n).min_by(|&i, &j| pc.f[i].total_cmp(&pc.f[j])).unwrap_or(0);
    let (b, c) = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .min_by(|&(i, j), &(k, l)| pc.r[(i, j)].total_cmp(&pc.r[(k, l)]))
        .unwrap_or((0, 0));
    let mut soft_f = Point::zeros(n);
    soft_f.f.0[a] = c64::new(1.0, 0.0);
    let mut soft_r = Point::zeros(n);
    if b == c {
        soft_r.r[(b, b)] = c64::new(1.0, 0.0);
    } else {
        soft_r.r[(b, c)] = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        soft_r.r[(c, b)] = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    }
    [soft_f, soft_r]
}

/// Minimum of `hessian_form_at_origin(d)/‖d‖²` over random directions and the
/// two softest coordinate directions, and of finite-difference Hessian forms
/// at random points of the ball of radius 0.05.
pub fn convexity_check(fiber: &Fiber, samples: usize, seed: u64) -> Result<f64> {
    let n = fiber.n();
    let mut min = f64::INFINITY;
    let random = (0..samples).map(|i| random_direction(seed.wrapping_add(i as u64), n, i));
    for d in random.chain(softest_directions(fiber)) {
        let q = fiber.hessian_form_at_origin(&d.f, &SqueezeKernel(d.r.clone()));
        min = min.min(q);
    }
    Ok(min.min(convexity_in_ball(fiber, 0.05, samples, seed.wrapping_add(1_000_003))?))
}

/// Minimum finite-difference Hessian Rayleigh quotient at random points of
/// the ball of the given radius.
pub fn convexity_in_ball(fiber: &Fiber, radius: f64, samples: usize, seed: u64) -> Result<f64> {
    let n = fiber.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = f64::INFINITY;
    for i in 0..samples {
        let s: f64 = StandardNormal.sample(&mut rng);
        let frac = (0.5 + 0.5 * s.tanh()).clamp(0.0, 1.0);
        let x = random_direction(seed.wrapping_add(7 * i as u64 + 1), n, 2).scaled(radius * frac);
        let d = random_direction(seed.wrapping_add(7 * i as u64 + 2), n, i);
        min = min.min(hessian_form_fd(fiber, &x, &d)?);
    }
    Ok(min)
}

fn estimate_convexity_radius(fiber: &Fiber, xnorm: f64, samples: usize, seed: u64) -> f64 {
    let bound = 0.25 * fiber.grid().sigma() - 1e-6;
    let mut radius = xnorm.max(1e-3);
    let mut best = 0.0;
    for k in 0..5 {
        match convexity_in_ball(fiber, radius, samples, seed.wrapping_add(k)) {
            Ok(m) if m >= bound => best = radius,
            _ => break,
        }
        radius *= 2.0;
    }
    best
}

/// Minimum of `Ê(x) / (σ‖x‖²)` over random points whose norms range
/// log-uniformly from 1e-3 to 10.
pub fn coercivity_check(fiber: &Fiber, samples: usize, seed: u64) -> Result<f64> {
    let sigma = fiber.grid().sigma();
    if !(sigma > 0.0) {
        return Err(Error::Domain("coercivity needs sigma > 0".into()));
    }
    let n = fiber.n();
    let mut worst = f64::INFINITY;
    for i in 0..samples {
        let t = if samples > 1 { i as f64 / (samples - 1) as f64 } else { 1.0 };
        let norm = 10f64.powf(-3.0 + 4.0 * t);
        let x = random_direction(seed.wrapping_add(i as u64), n, i).scaled(norm);
        let e = evaluate(fiber, x)?.energy;
        worst = worst.min(e / (sigma * norm * norm));
    }
    Ok(worst)
}
