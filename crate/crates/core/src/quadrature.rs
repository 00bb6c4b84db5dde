//! One-dimensional Gauss–Legendre rules and spherical rules on the unit sphere.

use crate::error::{Error, Result};
use crate::Vec3;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// A quadrature rule on the unit sphere with weights summing to one.
#[derive(Debug, Clone)]
pub struct SphericalRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Polynomials of total degree up to this value are integrated exactly.
    pub degree: usize,
}

impl SphericalRule {
    /// Octahedral Lebedev rules for 6, 14, 26, 38 and 50 points; any other
    /// size `2m²` (m ≥ 2) selects a Gauss–Legendre × uniform-azimuth product rule.
    pub fn from_size(n: usize) -> Result<Self> {
        match n {
            6 | 14 | 26 | 38 | 50 => Ok(lebedev(n)),
            _ => {
                let m = ((n / 2) as f64).sqrt().round() as usize;
                if m >= 2 && 2 * m * m == n {
                    Ok(product_rule(m))
                } else {
                    Err(Error::Parameter(format!(
                        "no spherical rule with {n} points (use 6, 14, 26, 38, 50 or 2m² with m ≥ 2)"
                    )))
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct RuleBuilder {
    points: Vec<Vec3>,
    weights: Vec<f64>,
}

impl RuleBuilder {
    fn new() -> Self {
        Self { points: Vec::new(), weights: Vec::new() }
    }

    fn push(&mut self, p: Vec3, w: f64) {
        self.points.push(p);
        self.weights.push(w);
    }

    fn axes(&mut self, w: f64) {
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut p = [0.0; 3];
                p[k] = s;
                self.push(p, w);
            }
        }
    }

    fn edges(&mut self, w: f64) {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        for zero in 0..3 {
            let (i, j) = match zero {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            for si in [a, -a] {
                for sj in [a, -a] {
                    let mut p = [0.0; 3];
                    p[i] = si;
                    p[j] = sj;
                    self.push(p, w);
                }
            }
        }
    }

    fn corners(&mut self, w: f64) {
        let a = 1.0 / 3f64.sqrt();
        for sx in [a, -a] {
            for sy in [a, -a] {
                for sz in [a, -a] {
                    self.push([sx, sy, sz], w);
                }
            }
        }
    }

    /// The 24 points `(±l, ±l, ±m)` and permutations.
    fn llm(&mut self, l: f64, m: f64, w: f64) {
        for pos in 0..3 {
            for sl1 in [l, -l] {
                for sl2 in [l, -l] {
                    for sm in [m, -m] {
                        let mut p = [0.0; 3];
                        p[pos] = sm;
                        let others: Vec<usize> = (0..3).filter(|&k| k != pos).collect();
                        p[others[0]] = sl1;
                        p[others[1]] = sl2;
                        self.push(p, w);
                    }
                }
            }
        }
    }

    /// The 24 points `(±p, ±q, 0)` and permutations.
    fn pq0(&mut self, p: f64, q: f64, w: f64) {
        let perms = [(0, 1, 2), (1, 0, 2), (0, 2, 1), (2, 0, 1), (1, 2, 0), (2, 1, 0)];
        for (ip, iq, _) in perms {
            for sp in [p, -p] {
                for sq in [q, -q] {
                    let mut v = [0.0; 3];
                    v[ip] = sp;
                    v[iq] = sq;
                    self.push(v, w);
                }
            }
        }
    }

    fn finish(self, degree: usize) -> SphericalRule {
        SphericalRule { points: self.points, weights: self.weights, degree }
    }
}

fn lebedev(n: usize) -> SphericalRule {
    let mut b = RuleBuilder::new();
    match n {
        6 => {
            b.axes(1.0 / 6.0);
            b.finish(3)
        }
        14 => {
            b.axes(1.0 / 15.0);
            b.corners(3.0 / 40.0);
            b.finish(5)
        }
        26 => {
            b.axes(1.0 / 21.0);
            b.edges(4.0 / 105.0);
            b.corners(9.0 / 280.0);
            b.finish(7)
        }
        38 => {
            b.axes(1.0 / 105.0);
            b.corners(9.0 / 280.0);
            b.pq0(0.459_700_843_380_983_1, 0.888_073_833_977_115_3, 1.0 / 35.0);
            b.finish(9)
        }
        50 => {
            b.axes(4.0 / 315.0);
            b.edges(64.0 / 2835.0);
            b.corners(27.0 / 1280.0);
            let l = 1.0 / 11f64.sqrt();
            b.llm(l, 3.0 * l, 14641.0 / 725_760.0);
            b.finish(11)
        }
        _ => unreachable!("caller checks the size"),
    }
}

fn product_rule(m: usize) -> SphericalRule {
    let (ct, wt) = gauss_legendre(m);
    let nphi = 2 * m;
    let mut b = RuleBuilder::new();
    for (c, w) in ct.iter().zip(&wt) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for j in 0..nphi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / nphi as f64;
            b.push([s * phi.cos(), s * phi.sin(), *c], 0.5 * w / nphi as f64);
        }
    }
    b.finish(2 * m - 1)
}
