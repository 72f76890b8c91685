use nalgebra::DMatrix;

use super::CalibrationFunction;
use crate::error::{Error, Result};
use crate::kernel::{rbf_cross, rbf_gram, rbf_vector};
use crate::scalar::Scalar;
use crate::simplex::Dataset;

/// Two-step kernel ridge regression: a vector-valued ridge fit of the
/// residuals plugged into the inner product,
/// `h(p, p') = k(p)^T (K + lambda n I)^-1 Delta^T Delta (K + lambda n I)^-1 k(p')`.
#[derive(Clone, Debug)]
pub struct UkkrModel<T: Scalar = f64> {
    train: Dataset<T>,
    gamma: T,
    lambda: T,
    /// `W = (K + lambda n I)^-1 Delta^T`, `n x r`.
    weights: DMatrix<T>,
}

/// Fits through a Cholesky solve of `K + lambda n I`.
pub fn fit_ukkr<T: Scalar>(train: &Dataset<T>, lambda: T, gamma: T) -> Result<UkkrModel<T>> {
    if train.is_empty() {
        return Err(Error::input("empty dataset"));
    }
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::input(format!("gamma must be positive, got {gamma}")));
    }
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::input(format!("lambda must be non-negative, got {lambda}")));
    }
    let n = train.len();
    let mut system = rbf_gram(train, gamma);
    let shift = lambda * T::from_count(n);
    for i in 0..n {
        system[(i, i)] += shift;
    }
    let rhs = train.residual_matrix().transpose();
    let weights = T::cholesky_solve(system, &rhs)
        .ok_or_else(|| Error::numeric("K + lambda n I is singular or not positive definite"))?;
    Ok(UkkrModel::from_weights(train.clone(), gamma, lambda, weights))
}

/// `h_ukkr(p, p')`.
pub fn eval_ukkr<T: Scalar>(model: &UkkrModel<T>, p: &[T], p_prime: &[T]) -> T {
    model.eval(p, p_prime)
}

impl<T: Scalar> UkkrModel<T> {
    pub(crate) fn from_weights(train: Dataset<T>, gamma: T, lambda: T, weights: DMatrix<T>) -> Self {
        Self { train, gamma, lambda, weights }
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// `W W^T`, the `n x n` matrix between the two kernel vectors.
    pub fn core(&self) -> DMatrix<T> {
        &self.weights * self.weights.transpose()
    }

    pub fn weights(&self) -> &DMatrix<T> {
        &self.weights
    }

    /// Rows `W^T k(x'_i)`: the fitted residual at each point of `data`.
    pub fn fitted_residuals(&self, data: &Dataset<T>) -> DMatrix<T> {
        rbf_cross(data, &self.train, self.gamma) * &self.weights
    }
}

impl<T: Scalar> CalibrationFunction<T> for UkkrModel<T> {
    fn eval(&self, p: &[T], q: &[T]) -> T {
        let fp = self.weights.tr_mul(&rbf_vector(&self.train, p, self.gamma));
        let fq = self.weights.tr_mul(&rbf_vector(&self.train, q, self.gamma));
        fp.dot(&fq)
    }

    fn eval_diagonal(&self, data: &Dataset<T>) -> Vec<T> {
        let f = self.fitted_residuals(data);
        f.row_iter().map(|r| r.dot(&r)).collect()
    }

    fn eval_matrix(&self, data: &Dataset<T>) -> DMatrix<T> {
        let f = self.fitted_residuals(data);
        &f * f.transpose()
    }
}
