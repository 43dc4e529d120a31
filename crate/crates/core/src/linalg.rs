//! Dense linear-algebra helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

const SVD_MAX_ITER: usize = 10_000;
const SCHUR_MAX_ITER: usize = 20_000;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `exp(i x)`
#[inline]
pub fn expi(x: f64) -> C64 {
    C64::new(x.cos(), x.sin())
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Singular values in no particular order.
pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return Ok(alloc::vec![m[(0, 0)].norm()]);
    }
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    Ok(svd.singular_values.iter().copied().collect())
}

pub fn sigma_min(m: &CMat) -> Result<f64> {
    Ok(singular_values(m)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Spectral (induced 2-) norm.
pub fn norm2(m: &CMat) -> Result<f64> {
    Ok(singular_values(m)?.into_iter().fold(0.0, f64::max))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn vec_max_abs(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalue moduli-maximum of a real matrix.
///
/// Uses a bounded real Schur iteration; if it stalls, falls back to Gelfand's formula
/// `rho = lim ||A^(2^k)||^(2^-k)` evaluated by repeated squaring.
pub fn spectral_radius_real(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER) {
        Some(s) => s.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => gelfand_real(m),
    }
}

pub fn spectral_radius_complex(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    // Real input takes the cheaper real path.
    if m.iter().all(|z| z.im == 0.0) {
        return spectral_radius_real(&m.map(|z| z.re));
    }
    match Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER) {
        Some(s) => {
            let (_, t) = s.unpack();
            (0..t.nrows()).map(|i| t[(i, i)].norm()).fold(0.0, f64::max)
        }
        None => gelfand_complex(m),
    }
}

fn gelfand_real(m: &RMat) -> f64 {
    let mut b = m.clone();
    let mut log_scale = 0.0;
    const SQUARINGS: i32 = 12;
    let n0 = b.norm();
    if n0 == 0.0 {
        return 0.0;
    }
    b /= n0;
    log_scale += n0.ln();
    for _ in 0..SQUARINGS {
        b = &b * &b;
        let n = b.norm();
        if n == 0.0 {
            return 0.0;
        }
        b /= n;
        log_scale = 2.0 * log_scale + n.ln();
    }
    (log_scale / 2f64.powi(SQUARINGS)).exp()
}

fn gelfand_complex(m: &CMat) -> f64 {
    let mut b = m.clone();
    const SQUARINGS: i32 = 12;
    let n0 = b.norm();
    if n0 == 0.0 {
        return 0.0;
    }
    b /= C64::from(n0);
    let mut log_scale = n0.ln();
    for _ in 0..SQUARINGS {
        b = &b * &b;
        let n = b.norm();
        if n == 0.0 {
            return 0.0;
        }
        b /= C64::from(n);
        log_scale = 2.0 * log_scale + n.ln();
    }
    (log_scale / 2f64.powi(SQUARINGS)).exp()
}

/// Least-squares line `y = slope x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// `n` evenly spaced points covering `[a, b]` inclusive (`[a]` if `n == 1`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Euclidean remainder for floats, result in `[0, p)`.
#[inline]
pub fn wrap(t: f64, p: f64) -> f64 {
    let r = t % p;
    if r < 0.0 {
        let r = r + p;
        if r >= p {
            0.0
        } else {
            r
        }
    } else {
        r
    }
}
