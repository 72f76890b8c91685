//! Kernels on the simplex: the RBF kernel behind the kernel ridge estimators
//! and the Dirichlet kernel behind the density-ratio estimator.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::Dataset;

/// Components are clipped to at least this before logs are taken.
pub const DIRICHLET_CLIP: f64 = 1e-10;

/// `exp(-gamma * ||x - y||^2)`.
#[inline]
pub fn rbf_kernel<T: Scalar>(x: &[T], y: &[T], gamma: T) -> T {
    let sq = x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| {
        let d = a - b;
        acc + d * d
    });
    (-gamma * sq).exp()
}

/// Dirichlet density of `x` under concentration `alpha = y / bandwidth + 1`.
///
/// Both arguments are clipped to at least [`DIRICHLET_CLIP`] and renormalised,
/// so points on the simplex boundary give finite values.
pub fn dirichlet_kernel<T: Scalar>(x: &[T], y: &[T], bandwidth: T) -> Result<T> {
    log_dirichlet_kernel(x, y, bandwidth).map(T::exp)
}

pub fn log_dirichlet_kernel<T: Scalar>(x: &[T], y: &[T], bandwidth: T) -> Result<T> {
    if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
        return Err(Error::input(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::input("dirichlet kernel arguments differ in dimension"));
    }
    let log_x = clipped(x).into_iter().map(T::ln);
    let alpha = concentration(y, bandwidth);
    Ok(log_normaliser(&alpha)
        + alpha.iter().zip(log_x).fold(T::zero(), |acc, (&a, lx)| acc + (a - T::one()) * lx))
}

/// Clips to `[DIRICHLET_CLIP, 1]` and renormalises onto the simplex.
pub(crate) fn clipped<T: Scalar>(v: &[T]) -> Vec<T> {
    let floor = T::lit(DIRICHLET_CLIP);
    let mut out: Vec<T> = v.iter().map(|&c| c.max(floor)).collect();
    let total = out.iter().fold(T::zero(), |a, &b| a + b);
    for c in &mut out {
        *c /= total;
    }
    out
}

pub(crate) fn concentration<T: Scalar>(y: &[T], bandwidth: T) -> Vec<T> {
    clipped(y).into_iter().map(|c| c / bandwidth + T::one()).collect()
}

/// `ln Gamma(sum alpha) - sum ln Gamma(alpha_k)`.
pub(crate) fn log_normaliser<T: Scalar>(alpha: &[T]) -> T {
    let total = alpha.iter().fold(T::zero(), |a, &b| a + b);
    alpha.iter().fold(total.ln_gamma(), |acc, &a| acc - a.ln_gamma())
}

/// Gram matrix `K[i, j] = k(x_i, x_j)` over the points of `data`.
pub fn rbf_gram<T: Scalar>(data: &Dataset<T>, gamma: T) -> DMatrix<T> {
    let n = data.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = T::one();
        for i in (j + 1)..n {
            let v = rbf_kernel(data.point(i), data.point(j), gamma);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross Gram `K[i, j] = k(x_i, x'_j)`, `x` from `rows` and `x'` from `cols`.
pub fn rbf_cross<T: Scalar>(rows: &Dataset<T>, cols: &Dataset<T>, gamma: T) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| rbf_kernel(rows.point(i), cols.point(j), gamma))
}

/// Kernel vector `k(p)[i] = k(x_i, p)` against the points of `data`.
pub fn rbf_vector<T: Scalar>(data: &Dataset<T>, p: &[T], gamma: T) -> nalgebra::DVector<T> {
    nalgebra::DVector::from_fn(data.len(), |i, _| rbf_kernel(data.point(i), p, gamma))
}
