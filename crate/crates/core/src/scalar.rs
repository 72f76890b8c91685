//! The floating-point abstraction every estimator is generic over.
//!
//! Arithmetic goes through [`num_traits::Float`]; the handful of dense
//! linear-algebra kernels that need a concrete field (symmetric
//! eigendecomposition, Cholesky and LU solves) are provided per type.

use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, DVector};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// A real scalar usable throughout the crate (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + nalgebra::Scalar
    + Copy
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance on `sum(p) == 1` for a probability vector.
    fn simplex_tol() -> Self;

    /// Eigenvalues of a Gram matrix below `-gram_eigen_floor()` signal a
    /// broken kernel matrix rather than round-off.
    fn gram_eigen_floor() -> Self;

    /// Smallest eigenvalue accepted when an unregularised system is inverted.
    fn singular_floor() -> Self;

    fn ln_gamma(self) -> Self;

    /// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
    /// Only the lower triangle is read.
    fn symmetric_eigen(m: &DMatrix<Self>) -> Option<(DVector<Self>, DMatrix<Self>)>;

    /// Solves `a x = b` for symmetric positive definite `a`.
    fn cholesky_solve(a: DMatrix<Self>, b: &DMatrix<Self>) -> Option<DMatrix<Self>>;

    /// Solves `a x = b` for a general square `a`.
    fn lu_solve(a: DMatrix<Self>, b: &DVector<Self>) -> Option<DVector<Self>>;

    /// Lossless-enough conversion from `f64` constants.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }
}

macro_rules! impl_scalar {
    ($t:ty, $tol:expr, $floor:expr, $singular:expr, $lgamma:path) => {
        impl Scalar for $t {
            #[inline]
            fn simplex_tol() -> Self {
                $tol
            }

            #[inline]
            fn gram_eigen_floor() -> Self {
                $floor
            }

            #[inline]
            fn singular_floor() -> Self {
                $singular
            }

            #[inline]
            fn ln_gamma(self) -> Self {
                $lgamma(self)
            }

            fn symmetric_eigen(m: &DMatrix<Self>) -> Option<(DVector<Self>, DMatrix<Self>)> {
                let n = m.nrows();
                if n != m.ncols() {
                    return None;
                }
                if n == 0 {
                    return Some((DVector::zeros(0), DMatrix::zeros(0, 0)));
                }
                let view = faer::MatRef::from_column_major_slice(m.as_slice(), n, n);
                let evd = view.self_adjoint_eigen(faer::Side::Lower).ok()?;
                let s = evd.S().column_vector();
                let u = evd.U();
                let values = DVector::from_fn(n, |i, _| s[i]);
                let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
                Some((values, vectors))
            }

            fn cholesky_solve(a: DMatrix<Self>, b: &DMatrix<Self>) -> Option<DMatrix<Self>> {
                let chol = a.cholesky()?;
                Some(chol.solve(b))
            }

            fn lu_solve(a: DMatrix<Self>, b: &DVector<Self>) -> Option<DVector<Self>> {
                a.lu().solve(b)
            }
        }
    };
}

impl_scalar!(f64, 1e-9, 1e-8, 1e-12, libm::lgamma);
impl_scalar!(f32, 1e-5, 1e-3, 1e-6, libm::lgammaf);
