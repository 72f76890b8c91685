use nalgebra::DMatrix;

use super::CalibrationFunction;
use crate::error::{Error, Result};
use crate::kernel::{clipped, concentration};
use crate::scalar::Scalar;
use crate::simplex::{dot, Dataset, Mode};

/// Rows of query points processed at once in the batched paths.
const BLOCK: usize = 256;

/// Dirichlet-kernel density-ratio estimator.
///
/// `g(q) = sum_i t_i k(x_i; q) / sum_i k(x_i; q)` estimates the conditional
/// label distribution and `h(p, p') = <p - g(p), p' - g(p')>`. In top-label
/// mode the confidence `c` is lifted to `(c, 1 - c)` for the kernel and `g`
/// is the smoothed accuracy.
///
/// The kernel weights are normalised by their maximum before summation, so
/// `g` is only undefined when every log-weight is non-finite; such queries
/// evaluate to NaN and are dropped by the risk and the final estimate.
#[derive(Clone, Debug)]
pub struct KdeModel<T: Scalar = f64> {
    train: Dataset<T>,
    bandwidth: T,
    log_points: DMatrix<T>,
    targets: DMatrix<T>,
}

pub fn fit_kde<T: Scalar>(train: &Dataset<T>, bandwidth: T) -> Result<KdeModel<T>> {
    if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
        return Err(Error::input(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if train.is_empty() {
        return Err(Error::input("empty dataset"));
    }
    let n = train.len();
    let lifted_dim = lift(train.mode(), train.point(0)).len();
    let mut log_points = DMatrix::zeros(n, lifted_dim);
    let mut targets = DMatrix::zeros(n, train.dim());
    let mut t = vec![T::zero(); train.dim()];
    for i in 0..n {
        for (k, v) in clipped(&lift(train.mode(), train.point(i))).into_iter().enumerate() {
            log_points[(i, k)] = v.ln();
        }
        train.target_into(i, &mut t);
        for (k, &v) in t.iter().enumerate() {
            targets[(i, k)] = v;
        }
    }
    Ok(KdeModel { train: train.clone(), bandwidth, log_points, targets })
}

/// `h_kde(p, p')`.
pub fn eval_kde<T: Scalar>(model: &KdeModel<T>, p: &[T], p_prime: &[T]) -> T {
    model.eval(p, p_prime)
}

fn lift<T: Scalar>(mode: Mode, x: &[T]) -> Vec<T> {
    match mode {
        Mode::Canonical => x.to_vec(),
        Mode::TopLabel => vec![x[0], T::one() - x[0]],
    }
}

impl<T: Scalar> KdeModel<T> {
    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn train(&self) -> &Dataset<T> {
        &self.train
    }

    /// The smoothed conditional `g(q)`; `None` when the kernel weights are
    /// degenerate.
    pub fn conditional(&self, q: &[T]) -> Option<Vec<T>> {
        let alpha = concentration(&lift(self.train.mode(), q), self.bandwidth);
        // the Dirichlet normaliser depends only on q and cancels in the ratio
        let logs: Vec<T> = (0..self.log_points.nrows())
            .map(|i| {
                alpha
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (k, &a)| acc + (a - T::one()) * self.log_points[(i, k)])
            })
            .collect();
        self.weighted_targets(&logs)
    }

    fn weighted_targets(&self, logs: &[T]) -> Option<Vec<T>> {
        let max = logs.iter().copied().fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return None;
        }
        let mut den = T::zero();
        let mut num = vec![T::zero(); self.targets.ncols()];
        for (i, &l) in logs.iter().enumerate() {
            let w = (l - max).exp();
            den += w;
            for (k, v) in num.iter_mut().enumerate() {
                *v += w * self.targets[(i, k)];
            }
        }
        if !(den > T::zero()) || !den.is_finite() {
            return None;
        }
        Some(num.into_iter().map(|v| v / den).collect())
    }

    /// Rows `x_i - g(x_i)` for every point of `data` (NaN rows where `g` is
    /// undefined).
    pub fn residual_features(&self, data: &Dataset<T>) -> DMatrix<T> {
        let m = data.len();
        let r = self.targets.ncols();
        let lifted = self.log_points.ncols();
        let mut out = DMatrix::zeros(m, r);
        let mut start = 0;
        while start < m {
            let end = (start + BLOCK).min(m);
            let rows = end - start;
            let mut exponents = DMatrix::zeros(rows, lifted);
            for b in 0..rows {
                let alpha = concentration(&lift(data.mode(), data.point(start + b)), self.bandwidth);
                for (k, a) in alpha.into_iter().enumerate() {
                    exponents[(b, k)] = a - T::one();
                }
            }
            let logs = exponents * self.log_points.transpose();
            for b in 0..rows {
                let row: Vec<T> = logs.row(b).iter().copied().collect();
                let x = data.point(start + b);
                match self.weighted_targets(&row) {
                    Some(g) => {
                        for k in 0..r {
                            out[(start + b, k)] = x[k] - g[k];
                        }
                    }
                    None => out.row_mut(start + b).fill(T::nan()),
                }
            }
            start = end;
        }
        out
    }
}

impl<T: Scalar> CalibrationFunction<T> for KdeModel<T> {
    fn eval(&self, p: &[T], q: &[T]) -> T {
        let (Some(gp), Some(gq)) = (self.conditional(p), self.conditional(q)) else {
            return T::nan();
        };
        let rp: Vec<T> = p.iter().zip(&gp).map(|(&a, &b)| a - b).collect();
        let rq: Vec<T> = q.iter().zip(&gq).map(|(&a, &b)| a - b).collect();
        dot(&rp, &rq)
    }

    fn eval_diagonal(&self, data: &Dataset<T>) -> Vec<T> {
        let f = self.residual_features(data);
        f.row_iter().map(|r| r.dot(&r)).collect()
    }

    fn eval_matrix(&self, data: &Dataset<T>) -> DMatrix<T> {
        let f = self.residual_features(data);
        &f * f.transpose()
    }
}
