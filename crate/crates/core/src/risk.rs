//! Empirical calibration estimation risk: the mean squared error between
//! `h(x_i, x_j)` and the pairwise residual inner products over distinct pairs
//! of an evaluation set.
//!
//! The set passed in must not overlap the data `h` was fitted on; that is the
//! caller's responsibility.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{kkr_prediction_matrix, CalibrationFunction, KkrModel};
use crate::scalar::Scalar;
use crate::simplex::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskValue<T: Scalar = f64> {
    pub value: T,
    /// Ordered pairs that entered the mean.
    pub pairs_used: usize,
    /// Ordered pairs dropped because a prediction was NaN.
    pub dropped_nan: usize,
}

/// Which estimator of the risk to use on held-out data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RiskKind {
    /// All `n(n-1)` ordered pairs.
    #[default]
    Quadratic,
    /// `n` circular neighbour pairs after a seeded shuffle.
    Linear { seed: u64 },
}

fn require_pairs<T: Scalar>(eval_set: &Dataset<T>) -> Result<()> {
    if eval_set.len() < 2 {
        return Err(Error::input(format!(
            "risk needs at least 2 evaluation samples, got {}",
            eval_set.len()
        )));
    }
    Ok(())
}

#[derive(Default)]
struct Accumulator<T: Scalar> {
    total: T,
    used: usize,
    dropped: usize,
}

impl<T: Scalar> Accumulator<T> {
    fn push(&mut self, target: T, prediction: T, drop: bool) {
        if drop {
            self.dropped += 1;
        } else {
            let e = target - prediction;
            self.total += e * e;
            self.used += 1;
        }
    }

    fn finish(self) -> Result<RiskValue<T>> {
        if self.used == 0 {
            return Err(Error::numeric("every prediction pair was NaN"));
        }
        Ok(RiskValue { value: self.total / T::from_count(self.used), pairs_used: self.used, dropped_nan: self.dropped })
    }
}

/// U-statistic risk over all ordered pairs `i != j`, evaluating `h` pointwise.
///
/// A pair is dropped when `h(x_i, x_j)` or `h(x_j, x_i)` is NaN.
pub fn empirical_risk<T: Scalar, H: CalibrationFunction<T> + ?Sized>(
    h: &H,
    eval_set: &Dataset<T>,
) -> Result<RiskValue<T>> {
    require_pairs(eval_set)?;
    let n = eval_set.len();
    let predictions =
        DMatrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { h.eval(eval_set.point(i), eval_set.point(j)) });
    let mut acc = Accumulator::default();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = predictions[(i, j)];
            let drop = v.is_nan() || predictions[(j, i)].is_nan();
            acc.push(eval_set.pair_target(i, j), v, drop);
        }
    }
    acc.finish()
}

/// Risk from a precomputed prediction matrix `H[i, j] = h(x_i, x_j)`.
pub fn risk_from_matrix<T: Scalar>(predictions: &DMatrix<T>, eval_set: &Dataset<T>) -> Result<RiskValue<T>> {
    require_pairs(eval_set)?;
    let n = eval_set.len();
    if predictions.nrows() != n || predictions.ncols() != n {
        return Err(Error::input("prediction matrix does not match the evaluation set"));
    }
    let residuals = eval_set.residual_matrix();
    let targets = residuals.transpose() * &residuals;
    let mut acc = Accumulator::default();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = predictions[(i, j)];
            let drop = v.is_nan() || predictions[(j, i)].is_nan();
            acc.push(targets[(i, j)], v, drop);
        }
    }
    acc.finish()
}

/// Quadratic risk of a Kronecker kernel ridge model through the batched
/// prediction matrix, `O(n^2 n' + n n'^2)` instead of `n'^2` separate
/// `O(n^2)` evaluations.
pub fn empirical_risk_kkr<T: Scalar>(model: &KkrModel<T>, eval_set: &Dataset<T>) -> Result<RiskValue<T>> {
    require_pairs(eval_set)?;
    risk_from_matrix(&kkr_prediction_matrix(model, eval_set), eval_set)
}

/// Quadratic risk through the estimator's batched [`CalibrationFunction::eval_matrix`].
pub fn batched_risk<T: Scalar, H: CalibrationFunction<T> + ?Sized>(
    h: &H,
    eval_set: &Dataset<T>,
) -> Result<RiskValue<T>> {
    require_pairs(eval_set)?;
    risk_from_matrix(&h.eval_matrix(eval_set), eval_set)
}

/// Incomplete U-statistic over the `n` circular pairs `(s_i, s_{i+1 mod n})`
/// of a seeded shuffle `s`. Every sample enters exactly two pairs.
pub fn empirical_risk_linear<T: Scalar, H: CalibrationFunction<T> + ?Sized>(
    h: &H,
    eval_set: &Dataset<T>,
    seed: u64,
) -> Result<RiskValue<T>> {
    require_pairs(eval_set)?;
    let n = eval_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut acc = Accumulator::default();
    for k in 0..n {
        let (i, j) = (order[k], order[(k + 1) % n]);
        let v = h.eval(eval_set.point(i), eval_set.point(j));
        acc.push(eval_set.pair_target(i, j), v, v.is_nan());
    }
    acc.finish()
}

/// Risk of `h` on held-out data with the selected estimator.
pub fn holdout_risk<T: Scalar, H: CalibrationFunction<T> + ?Sized>(
    h: &H,
    eval_set: &Dataset<T>,
    kind: RiskKind,
) -> Result<RiskValue<T>> {
    match kind {
        RiskKind::Quadratic => batched_risk(h, eval_set),
        RiskKind::Linear { seed } => empirical_risk_linear(h, eval_set, seed),
    }
}
