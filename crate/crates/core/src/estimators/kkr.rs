use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ukkr::UkkrModel;
use super::CalibrationFunction;
use crate::error::{Error, Result};
use crate::kernel::{rbf_cross, rbf_gram, rbf_vector};
use crate::scalar::Scalar;
use crate::simplex::Dataset;

/// Eigendecomposition of the RBF Gram matrix of a training set, with the
/// residuals rotated into the eigenbasis.
///
/// Everything here is independent of the ridge constant, so one spectrum
/// serves a whole regularisation grid.
#[derive(Clone, Debug)]
pub struct GramSpectrum<T: Scalar = f64> {
    train: Dataset<T>,
    gamma: T,
    eigenvalues: DVector<T>,
    eigenvectors: DMatrix<T>,
    /// `Q^T`, kept explicitly so products with it take the fast gemm path.
    eigenvectors_t: DMatrix<T>,
    /// `Q^T Delta^T`, `n x r`.
    rotated_residuals: DMatrix<T>,
}

impl<T: Scalar> GramSpectrum<T> {
    pub fn new(train: &Dataset<T>, gamma: T) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::input("empty dataset"));
        }
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::input(format!("gamma must be positive, got {gamma}")));
        }
        let gram = rbf_gram(train, gamma);
        let (mut eigenvalues, eigenvectors) = T::symmetric_eigen(&gram)
            .ok_or_else(|| Error::numeric("symmetric eigendecomposition did not converge"))?;
        let floor = T::gram_eigen_floor();
        for v in eigenvalues.iter_mut() {
            if *v < -floor {
                return Err(Error::numeric(format!("Gram matrix has eigenvalue {v}")));
            }
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        let eigenvectors_t = eigenvectors.transpose();
        let rotated_residuals = &eigenvectors_t * train.residual_matrix().transpose();
        Ok(Self { train: train.clone(), gamma, eigenvalues, eigenvectors, eigenvectors_t, rotated_residuals })
    }

    pub fn train(&self) -> &Dataset<T> {
        &self.train
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// Clamped eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    fn n(&self) -> T {
        T::from_count(self.train.len())
    }

    fn check_lambda(&self, lambda: T) -> Result<()> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::input(format!("lambda must be non-negative, got {lambda}")));
        }
        if lambda == T::zero() {
            let min = self.eigenvalues.iter().copied().fold(T::infinity(), T::min);
            if min < T::singular_floor() {
                return Err(Error::numeric(format!(
                    "lambda = 0 with singular Gram matrix (minimum eigenvalue {min})"
                )));
            }
        }
        Ok(())
    }

    /// Kronecker kernel ridge model at ridge constant `lambda`.
    pub fn kkr(self: &Arc<Self>, lambda: T) -> Result<KkrModel<T>> {
        self.check_lambda(lambda)?;
        let n = self.n();
        let shift = lambda * n * n;
        let inner = &self.rotated_residuals * self.rotated_residuals.transpose();
        let size = inner.nrows();
        let mut core = DMatrix::zeros(size, size);
        for j in 0..size {
            for i in j..size {
                let v = inner[(i, j)] / (self.eigenvalues[i] * self.eigenvalues[j] + shift);
                core[(i, j)] = v;
                core[(j, i)] = v;
            }
        }
        Ok(KkrModel { spectrum: Arc::clone(self), lambda, core })
    }

    /// Two-step kernel ridge model computed through the spectrum:
    /// `(K + lambda n I)^-1 = Q diag(1 / (l_i + lambda n)) Q^T`.
    pub fn ukkr(&self, lambda: T) -> Result<UkkrModel<T>> {
        self.check_lambda(lambda)?;
        let shift = lambda * self.n();
        let mut scaled = self.rotated_residuals.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row /= self.eigenvalues[i] + shift;
        }
        let weights = &self.eigenvectors * scaled;
        Ok(UkkrModel::from_weights(self.train.clone(), self.gamma, lambda, weights))
    }

    /// `Q^T K_{X X'}` for the points of `data`, `n x m`.
    pub fn rotated_cross(&self, data: &Dataset<T>) -> DMatrix<T> {
        &self.eigenvectors_t * rbf_cross(&self.train, data, self.gamma)
    }
}

/// Kronecker kernel ridge regression over prediction pairs.
///
/// `h(p, p') = k(p)^T Q (L o Q^T Delta^T Delta Q) Q^T k(p')` where
/// `L[i, j] = 1 / (l_i l_j + lambda n^2)` and `o` is the elementwise product.
#[derive(Clone, Debug)]
pub struct KkrModel<T: Scalar = f64> {
    spectrum: Arc<GramSpectrum<T>>,
    lambda: T,
    core: DMatrix<T>,
}

pub fn fit_kkr<T: Scalar>(train: &Dataset<T>, lambda: T, gamma: T) -> Result<KkrModel<T>> {
    Arc::new(GramSpectrum::new(train, gamma)?).kkr(lambda)
}

/// `h_kkr(p, p')`.
pub fn eval_kkr<T: Scalar>(model: &KkrModel<T>, p: &[T], p_prime: &[T]) -> T {
    model.eval(p, p_prime)
}

/// The `n' x n'` matrix `H[i, j] = h_kkr(x'_i, x'_j)` over `data`, formed with
/// dense products in `O(n^2 n' + n n'^2)`.
pub fn kkr_prediction_matrix<T: Scalar>(model: &KkrModel<T>, data: &Dataset<T>) -> DMatrix<T> {
    let b = model.spectrum.rotated_cross(data);
    b.transpose() * (&model.core * &b)
}

impl<T: Scalar> KkrModel<T> {
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn gamma(&self) -> T {
        self.spectrum.gamma
    }

    /// `L o (Q^T Delta^T Delta Q)`.
    pub fn core(&self) -> &DMatrix<T> {
        &self.core
    }

    pub fn spectrum(&self) -> &GramSpectrum<T> {
        &self.spectrum
    }

    fn rotated_kernel(&self, p: &[T]) -> DVector<T> {
        &self.spectrum.eigenvectors_t * rbf_vector(&self.spectrum.train, p, self.spectrum.gamma)
    }
}

impl<T: Scalar> CalibrationFunction<T> for KkrModel<T> {
    fn eval(&self, p: &[T], q: &[T]) -> T {
        let u = self.rotated_kernel(p);
        let v = self.rotated_kernel(q);
        u.dot(&(&self.core * v))
    }

    fn eval_diagonal(&self, data: &Dataset<T>) -> Vec<T> {
        let b = self.spectrum.rotated_cross(data);
        let c = &self.core * &b;
        b.column_iter().zip(c.column_iter()).map(|(x, y)| x.dot(&y)).collect()
    }

    fn eval_matrix(&self, data: &Dataset<T>) -> DMatrix<T> {
        kkr_prediction_matrix(self, data)
    }
}
