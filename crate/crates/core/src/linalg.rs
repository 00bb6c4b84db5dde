//! Small dense linear-algebra helpers on top of `faer`.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn eigh(m: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("hermitian eigensolver: {e:?}")))?;
    let vals = (0..n).map(|i| e.S().column_vector()[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigenvalues (ascending) and eigenvectors of a real symmetric matrix.
pub fn eigh_real(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("symmetric eigensolver: {e:?}")))?;
    let vals = (0..n).map(|i| e.S().column_vector()[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// `V diag(d) V†` for a Hermitian functional calculus.
pub fn spectral(v: &Mat<c64>, d: &[f64]) -> Mat<c64> {
    let scaled = scale_cols(v, d);
    &scaled * v.adjoint()
}

/// `U diag(d)`.
pub fn scale_cols(u: &Mat<c64>, d: &[f64]) -> Mat<c64> {
    Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * d[j])
}

pub fn trace(m: &Mat<c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn frob(m: &Mat<c64>) -> f64 {
    m.norm_l2()
}

/// Real Frobenius inner product `Re Σ conj(a) b`.
pub fn re_inner(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let x = a[(i, j)];
            let y = b[(i, j)];
            s += x.re * y.re + x.im * y.im;
        }
    }
    s
}

pub fn transpose(m: &Mat<c64>) -> Mat<c64> {
    m.transpose().to_owned()
}

pub fn conj(m: &Mat<c64>) -> Mat<c64> {
    m.conjugate().to_owned()
}

pub fn adjoint(m: &Mat<c64>) -> Mat<c64> {
    m.adjoint().to_owned()
}

/// `½(m + mᵀ)`.
pub fn symmetrize(m: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)]) * 0.5)
}

/// `½(m + m†)`.
pub fn hermitize(m: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// `‖m − mᵀ‖_F`.
pub fn asymmetry(m: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += (m[(i, j)] - m[(j, i)]).norm_sqr();
        }
    }
    s.sqrt()
}

/// `‖m − m†‖_F`.
pub fn anti_hermiticity(m: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

pub fn diag(d: &[f64]) -> Mat<c64> {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(d[i], 0.0) } else { c64::new(0.0, 0.0) })
}

/// Largest absolute eigenvalue of a Hermitian matrix.
pub fn op_norm_herm(m: &Mat<c64>) -> Result<f64> {
    let (vals, _) = eigh(m)?;
    Ok(vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(m: &Mat<c64>) -> Mat<c64> {
    let n = m.nrows();
    let norm = m.norm_l2();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = Mat::from_fn(n, n, |i, j| m[(i, j)] * scale);
    let mut result = Mat::<c64>::identity(n, n);
    let mut term = Mat::<c64>::identity(n, n);
    for k in 1..=18 {
        term = &term * &a;
        let inv = 1.0 / k as f64;
        term = Mat::from_fn(n, n, |i, j| term[(i, j)] * inv);
        result = &result + &term;
        if term.norm_l2() <= 1e-18 * result.norm_l2() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
