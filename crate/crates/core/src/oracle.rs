//! Brute-force reference implementations used to check the fast paths.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernel::{rbf_gram, rbf_vector};
use crate::scalar::Scalar;
use crate::simplex::Dataset;

/// Largest training set [`eval_kkr_naive`] accepts; the dense system has
/// `n^2` unknowns and costs `O(n^6)`.
pub const NAIVE_KKR_MAX_N: usize = 12;

/// Kronecker kernel ridge prediction from the unreduced closed form
/// `vec(D^T D)^T (K (x) K + lambda n^2 I)^-1 (k(p) (x) k(p'))`, solved densely.
pub fn eval_kkr_naive<T: Scalar>(train: &Dataset<T>, lambda: T, gamma: T, p: &[T], p_prime: &[T]) -> Result<T> {
    let n = train.len();
    if n == 0 {
        return Err(Error::input("empty dataset"));
    }
    if n > NAIVE_KKR_MAX_N {
        return Err(Error::input(format!(
            "naive Kronecker solve refused for n = {n} > {NAIVE_KKR_MAX_N}"
        )));
    }
    let gram = rbf_gram(train, gamma);
    let mut system = gram.kronecker(&gram);
    let shift = lambda * T::from_count(n * n);
    for i in 0..n * n {
        system[(i, i)] += shift;
    }
    let kp = rbf_vector(train, p, gamma);
    let kq = rbf_vector(train, p_prime, gamma);
    let rhs = kp.kronecker(&kq);
    let solution = T::lu_solve(system, &rhs).ok_or_else(|| Error::numeric("singular Kronecker system"))?;
    // vec(D^T D), D^T D being symmetric makes the stacking order irrelevant
    let targets = DVector::from_fn(n * n, |idx, _| train.pair_target(idx / n, idx % n));
    Ok(targets.dot(&solution))
}
