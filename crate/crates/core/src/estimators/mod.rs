//! Calibration estimation functions `h(p, p')` whose diagonal mean estimates
//! a squared calibration error.

mod binning;
mod kde;
mod kkr;
mod ukkr;

use nalgebra::DMatrix;

pub use binning::{eval_binning, fit_binning, BinningModel};
pub use kde::{eval_kde, fit_kde, KdeModel};
pub use kkr::{eval_kkr, fit_kkr, kkr_prediction_matrix, GramSpectrum, KkrModel};
pub use ukkr::{eval_ukkr, fit_ukkr, UkkrModel};

use crate::scalar::Scalar;
use crate::sim::HsimModel;
use crate::simplex::Dataset;

/// A fitted, symmetric calibration estimation function.
///
/// `eval` may return NaN when the estimator is undefined at an input; the
/// risk and the final estimate drop such values and report how many.
pub trait CalibrationFunction<T: Scalar>: Send + Sync {
    fn eval(&self, p: &[T], q: &[T]) -> T;

    /// `h(x_i, x_i)` for every point of `data`.
    fn eval_diagonal(&self, data: &Dataset<T>) -> Vec<T> {
        (0..data.len()).map(|i| self.eval(data.point(i), data.point(i))).collect()
    }

    /// `H[i, j] = h(x_i, x_j)` over `data`.
    fn eval_matrix(&self, data: &Dataset<T>) -> DMatrix<T> {
        DMatrix::from_fn(data.len(), data.len(), |i, j| self.eval(data.point(i), data.point(j)))
    }
}

/// Any of the supported fitted estimators.
#[derive(Clone, Debug)]
pub enum EstimatorModel<T: Scalar = f64> {
    Bin(BinningModel<T>),
    Kde(KdeModel<T>),
    Kkr(KkrModel<T>),
    Ukkr(UkkrModel<T>),
    Sim(HsimModel<T>),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            EstimatorModel::Bin($m) => $e,
            EstimatorModel::Kde($m) => $e,
            EstimatorModel::Kkr($m) => $e,
            EstimatorModel::Ukkr($m) => $e,
            EstimatorModel::Sim($m) => $e,
        }
    };
}

impl<T: Scalar> CalibrationFunction<T> for EstimatorModel<T> {
    fn eval(&self, p: &[T], q: &[T]) -> T {
        dispatch!(self, m => m.eval(p, q))
    }

    fn eval_diagonal(&self, data: &Dataset<T>) -> Vec<T> {
        dispatch!(self, m => m.eval_diagonal(data))
    }

    fn eval_matrix(&self, data: &Dataset<T>) -> DMatrix<T> {
        dispatch!(self, m => m.eval_matrix(data))
    }
}

impl<T: Scalar, F: CalibrationFunction<T> + ?Sized> CalibrationFunction<T> for &F {
    fn eval(&self, p: &[T], q: &[T]) -> T {
        (**self).eval(p, q)
    }

    fn eval_diagonal(&self, data: &Dataset<T>) -> Vec<T> {
        (**self).eval_diagonal(data)
    }

    fn eval_matrix(&self, data: &Dataset<T>) -> DMatrix<T> {
        (**self).eval_matrix(data)
    }
}

/// `h(p, p') = c` everywhere. Mostly useful as a baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantModel<T: Scalar = f64>(pub T);

impl<T: Scalar> CalibrationFunction<T> for ConstantModel<T> {
    fn eval(&self, _p: &[T], _q: &[T]) -> T {
        self.0
    }
}
