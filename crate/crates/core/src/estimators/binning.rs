use nalgebra::DMatrix;

use super::CalibrationFunction;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{Dataset, Mode};

/// Equal-width histogram over top-label confidences.
///
/// `h(c, c') = gap(bin(c)) * gap(bin(c'))` with `gap = conf - acc` of the
/// training samples in the bin. Bins are `[m/M, (m+1)/M)`, the last one closed.
#[derive(Clone, Debug, PartialEq)]
pub struct BinningModel<T: Scalar = f64> {
    edges: Vec<T>,
    gaps: Vec<T>,
    counts: Vec<usize>,
}

pub fn fit_binning<T: Scalar>(train: &Dataset<T>, bins: usize) -> Result<BinningModel<T>> {
    if train.mode() != Mode::TopLabel {
        return Err(Error::input("binning needs a top-label dataset"));
    }
    if bins == 0 {
        return Err(Error::input("number of bins must be at least 1"));
    }
    if train.is_empty() {
        return Err(Error::input("empty dataset"));
    }
    let m = T::from_count(bins);
    let edges: Vec<T> = (0..=bins).map(|i| T::from_count(i) / m).collect();
    let mut conf = vec![T::zero(); bins];
    let mut acc = vec![T::zero(); bins];
    let mut counts = vec![0usize; bins];
    let model = BinningModel { edges, gaps: Vec::new(), counts: Vec::new() };
    for i in 0..train.len() {
        let c = train.point(i)[0];
        let b = model.bin_of(c);
        conf[b] += c;
        acc[b] += T::from_count(train.label(i));
        counts[b] += 1;
    }
    let gaps = conf
        .iter()
        .zip(&acc)
        .zip(&counts)
        .map(|((&c, &a), &k)| if k == 0 { T::zero() } else { (c - a) / T::from_count(k) })
        .collect();
    Ok(BinningModel { gaps, counts, ..model })
}

/// `h_bin(c, c')`; errors when either confidence lies outside `[0, 1]`.
pub fn eval_binning<T: Scalar>(model: &BinningModel<T>, c: T, c_prime: T) -> Result<T> {
    for v in [c, c_prime] {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::input(format!("confidence {v} outside [0, 1]")));
        }
    }
    Ok(model.gap_at(c) * model.gap_at(c_prime))
}

impl<T: Scalar> BinningModel<T> {
    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn gaps(&self) -> &[T] {
        &self.gaps
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Index of the bin containing `c` (assumed in `[0, 1]`).
    pub fn bin_of(&self, c: T) -> usize {
        let bins = self.bins();
        let guess = (c * T::from_count(bins)).floor().to_usize().unwrap_or(0);
        let mut b = guess.min(bins - 1);
        while b > 0 && c < self.edges[b] {
            b -= 1;
        }
        while b + 1 < bins && c >= self.edges[b + 1] {
            b += 1;
        }
        b
    }

    fn gap_at(&self, c: T) -> T {
        if !(c >= T::zero() && c <= T::one()) {
            return T::nan();
        }
        self.gaps[self.bin_of(c)]
    }

    /// `sum_m |B_m| / n * gap_m^2`, the squared binned top-label error of the
    /// training data.
    pub fn squared_error(&self) -> T {
        let n: usize = self.counts.iter().sum();
        let n = T::from_count(n);
        self.gaps
            .iter()
            .zip(&self.counts)
            .fold(T::zero(), |acc, (&g, &k)| acc + T::from_count(k) / n * g * g)
    }
}

impl<T: Scalar> CalibrationFunction<T> for BinningModel<T> {
    fn eval(&self, p: &[T], q: &[T]) -> T {
        self.gap_at(p[0]) * self.gap_at(q[0])
    }

    fn eval_diagonal(&self, data: &Dataset<T>) -> Vec<T> {
        (0..data.len())
            .map(|i| {
                let g = self.gap_at(data.point(i)[0]);
                g * g
            })
            .collect()
    }

    fn eval_matrix(&self, data: &Dataset<T>) -> DMatrix<T> {
        let g: Vec<T> = (0..data.len()).map(|i| self.gap_at(data.point(i)[0])).collect();
        DMatrix::from_fn(g.len(), g.len(), |i, j| g[i] * g[j])
    }
}
