//! Simplex-valued predictions, labelled samples and datasets.
//!
//! A [`Dataset`] stores either canonical samples (a full probability vector
//! and a class index) or their top-label reduction (a scalar confidence and a
//! correctness bit). Both share one representation: every sample has a point
//! `x` the estimators are evaluated at and a target `t`, and the residual
//! `x - t` is what pairwise regression targets are built from. In canonical
//! mode `t = e_y`; in top-label mode `x = [c]` and `t = [a]` with `a` the
//! correctness indicator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector<T: Scalar = f64>(Vec<T>);

impl<T: Scalar> ProbVector<T> {
    /// Validates `values` against the simplex with the scalar's default tolerance.
    pub fn new(values: Vec<T>) -> Result<Self> {
        Self::check(&values, T::simplex_tol())?;
        Ok(Self(values))
    }

    /// Accepts `values` whose sum is within `tol` of one and rescales them
    /// onto the simplex exactly.
    pub fn renormalized(mut values: Vec<T>, tol: T) -> Result<Self> {
        Self::check(&values, tol)?;
        let total = sum(&values);
        for v in &mut values {
            *v /= total;
        }
        Ok(Self(values))
    }

    fn check(values: &[T], tol: T) -> Result<()> {
        if values.is_empty() {
            return Err(Error::input("probability vector is empty"));
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < T::zero() || v > T::one() {
                return Err(Error::input(format!("component {k} = {v} is outside [0, 1]")));
            }
        }
        let total = sum(values);
        if (total - T::one()).abs() > tol {
            return Err(Error::input(format!("components sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    /// Index of the largest component, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> T {
        self.0[self.argmax()]
    }
}

impl<T: Scalar> AsRef<[T]> for ProbVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

/// A classifier prediction together with the observed class.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T: Scalar = f64> {
    pub probs: ProbVector<T>,
    pub label: usize,
}

impl<T: Scalar> Sample<T> {
    pub fn new(probs: ProbVector<T>, label: usize) -> Result<Self> {
        if label >= probs.dim() {
            return Err(Error::input(format!(
                "label {label} out of range for {} classes",
                probs.dim()
            )));
        }
        Ok(Self { probs, label })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Full probability vectors against one-hot labels.
    Canonical,
    /// Top-label confidence against correctness of the argmax.
    TopLabel,
}

/// Where a dataset came from within the evaluation pipeline. Hyperparameter
/// selection refuses data tagged [`Provenance::Test`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Full,
    Tune,
    Test,
    Fold,
}

#[derive(Clone, Debug)]
pub struct Dataset<T: Scalar = f64> {
    mode: Mode,
    dim: usize,
    points: Vec<T>,
    labels: Vec<usize>,
    provenance: Provenance,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a canonical dataset; all samples must share one dimension.
    pub fn canonical(samples: Vec<Sample<T>>) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.probs.dim())
            .ok_or_else(|| Error::input("empty dataset"))?;
        let mut points = Vec::with_capacity(samples.len() * dim);
        let mut labels = Vec::with_capacity(samples.len());
        for (i, s) in samples.into_iter().enumerate() {
            if s.probs.dim() != dim {
                return Err(Error::input(format!(
                    "sample {i} has {} classes, expected {dim}",
                    s.probs.dim()
                )));
            }
            if s.label >= dim {
                return Err(Error::input(format!("sample {i} has label {} >= {dim}", s.label)));
            }
            points.extend_from_slice(s.probs.as_slice());
            labels.push(s.label);
        }
        Ok(Self { mode: Mode::Canonical, dim, points, labels, provenance: Provenance::Full })
    }

    /// Builds a top-label dataset from confidences and correctness flags.
    pub fn top_label(confidences: Vec<T>, correct: Vec<bool>) -> Result<Self> {
        if confidences.is_empty() {
            return Err(Error::input("empty dataset"));
        }
        if confidences.len() != correct.len() {
            return Err(Error::input("confidence and correctness lengths differ"));
        }
        if let Some((i, c)) = confidences
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_finite() || **c < T::zero() || **c > T::one())
        {
            return Err(Error::input(format!("confidence {i} = {c} is outside [0, 1]")));
        }
        Ok(Self {
            mode: Mode::TopLabel,
            dim: 1,
            points: confidences,
            labels: correct.into_iter().map(usize::from).collect(),
            provenance: Provenance::Full,
        })
    }

    /// Top-label reduction of a canonical dataset (identity on top-label data).
    pub fn to_top_label(&self) -> Self {
        if self.mode == Mode::TopLabel {
            return self.clone();
        }
        let mut conf = Vec::with_capacity(self.len());
        let mut labels = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let p = self.point(i);
            let top = argmax(p);
            conf.push(p[top]);
            labels.push(usize::from(top == self.labels[i]));
        }
        Self { mode: Mode::TopLabel, dim: 1, points: conf, labels, provenance: self.provenance }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Dimension of each point: `d` in canonical mode, 1 in top-label mode.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// The point estimators are evaluated at for sample `i`.
    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Class index (canonical) or correctness indicator (top-label).
    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Writes the target vector of sample `i` into `out` (length `dim`).
    #[inline]
    pub fn target_into(&self, i: usize, out: &mut [T]) {
        match self.mode {
            Mode::Canonical => {
                out.fill(T::zero());
                out[self.labels[i]] = T::one();
            }
            Mode::TopLabel => out[0] = T::from_count(self.labels[i]),
        }
    }

    /// Residual `x_i - t_i`.
    pub fn residual(&self, i: usize) -> Vec<T> {
        let mut r = vec![T::zero(); self.dim];
        self.target_into(i, &mut r);
        for (r, &x) in r.iter_mut().zip(self.point(i)) {
            *r = x - *r;
        }
        r
    }

    /// `dim x n` matrix whose column `i` is the residual of sample `i`.
    pub fn residual_matrix(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.dim, self.len());
        for i in 0..self.len() {
            m.column_mut(i).copy_from_slice(&self.residual(i));
        }
        m
    }

    /// `n x dim` matrix of points, one row per sample.
    pub fn point_matrix(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.points)
    }

    /// Pairwise regression target `<x_i - t_i, x_j - t_j>`.
    pub fn pair_target(&self, i: usize, j: usize) -> T {
        let (xi, xj) = (self.point(i), self.point(j));
        match self.mode {
            Mode::TopLabel => {
                (xi[0] - T::from_count(self.labels[i])) * (xj[0] - T::from_count(self.labels[j]))
            }
            Mode::Canonical => {
                let (yi, yj) = (self.labels[i], self.labels[j]);
                let mut acc = T::zero();
                for k in 0..self.dim {
                    let ri = if k == yi { xi[k] - T::one() } else { xi[k] };
                    let rj = if k == yj { xj[k] - T::one() } else { xj[k] };
                    acc += ri * rj;
                }
                acc
            }
        }
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], provenance: Provenance) -> Self {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            points.extend_from_slice(self.point(i));
            labels.push(self.labels[i]);
        }
        Self { mode: self.mode, dim: self.dim, points, labels, provenance }
    }

    /// Canonical samples; `None` for top-label data.
    pub fn samples(&self) -> Option<Vec<Sample<T>>> {
        if self.mode != Mode::Canonical {
            return None;
        }
        Some(
            (0..self.len())
                .map(|i| Sample { probs: ProbVector(self.point(i).to_vec()), label: self.labels[i] })
                .collect(),
        )
    }

    /// Fraction of samples whose argmax (canonical) or correctness bit
    /// (top-label) is right.
    pub fn accuracy(&self) -> T {
        let hits = match self.mode {
            Mode::Canonical => (0..self.len()).filter(|&i| argmax(self.point(i)) == self.labels[i]).count(),
            Mode::TopLabel => self.labels.iter().filter(|&&l| l == 1).count(),
        };
        T::from_count(hits) / T::from_count(self.len())
    }
}

/// `softmax(logits / temperature)`, shifted by the maximum for stability.
pub fn softmax<T: Scalar>(logits: &[T], temperature: T) -> Result<ProbVector<T>> {
    if logits.is_empty() {
        return Err(Error::input("softmax of an empty vector"));
    }
    if !(temperature > T::zero()) || !temperature.is_finite() {
        return Err(Error::input(format!("temperature must be positive, got {temperature}")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite logit"));
    }
    let mut out: Vec<T> = logits.iter().map(|&v| v / temperature).collect();
    softmax_in_place(&mut out);
    Ok(ProbVector(out))
}

pub(crate) fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// Reduces a prediction to `(max confidence, argmax == label)`.
pub fn top_label_reduce<T: Scalar>(probs: &ProbVector<T>, label: usize) -> (T, bool) {
    let top = probs.argmax();
    (probs.as_slice()[top], top == label)
}

/// Regression target for an ordered pair of samples.
///
/// Canonical: `<p_i - e_{y_i}, p_j - e_{y_j}>`. Top-label: `(c_i - a_i)(c_j - a_j)`,
/// the scalar form, which is half the inner product of the two-class lift.
pub fn pair_target<T: Scalar>(a: &Sample<T>, b: &Sample<T>, mode: Mode) -> Result<T> {
    if a.probs.dim() != b.probs.dim() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            a.probs.dim(),
            b.probs.dim()
        )));
    }
    Ok(match mode {
        Mode::Canonical => a
            .probs
            .as_slice()
            .iter()
            .zip(b.probs.as_slice())
            .enumerate()
            .map(|(k, (&pa, &pb))| {
                let ra = if k == a.label { pa - T::one() } else { pa };
                let rb = if k == b.label { pb - T::one() } else { pb };
                ra * rb
            })
            .fold(T::zero(), |acc, v| acc + v),
        Mode::TopLabel => {
            let (ca, ok_a) = top_label_reduce(&a.probs, a.label);
            let (cb, ok_b) = top_label_reduce(&b.probs, b.label);
            (ca - T::from_count(ok_a as usize)) * (cb - T::from_count(ok_b as usize))
        }
    })
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = k;
        }
    }
    best
}

pub(crate) fn sum<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x)
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn sample(v: &[f64], y: usize) -> Sample {
        Sample::new(pv(v), y).unwrap()
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::<f64>::new(vec![]).is_err());
        let p: ProbVector = ProbVector::renormalized(vec![0.5, 0.5000005], 1e-6).unwrap();
        assert!((sum(p.as_slice()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
        for c in [-3.0, 0.0, 7.5] {
            let p: ProbVector = softmax(&[c, c, c], 1.0).unwrap();
            for &v in p.as_slice() {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        // exp(k) / (e + e^2 + e^3), k = 1, 2, 3
        let p: ProbVector = softmax(&[1.0, 2.0, 3.0], 1.0).unwrap();
        let expected = [0.090_030_573_170_380_46, 0.244_728_471_054_797_64, 0.665_240_955_774_821_9];
        for (a, b) in p.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p.as_slice()[0] - 0.09003).abs() < 1e-5);
    }

    #[test]
    fn softmax_temperature_and_errors() {
        let a: ProbVector = softmax(&[1.0, 2.0], 2.0).unwrap();
        let b = softmax(&[0.5, 1.0], 1.0).unwrap();
        assert!((a.as_slice()[0] - b.as_slice()[0]).abs() < 1e-15);
        assert!(softmax(&[f64::NAN, 0.0], 1.0).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0], 1.0).is_err());
        assert!(softmax(&[0.0, 0.0], 0.0).is_err());
        assert!(softmax(&[0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn top_label_examples() {
        assert_eq!(top_label_reduce(&pv(&[0.7, 0.2, 0.1]), 0), (0.7, true));
        assert_eq!(top_label_reduce(&pv(&[0.5, 0.5]), 1), (0.5, false));
        assert_eq!(top_label_reduce(&pv(&[0.5, 0.5]), 0), (0.5, true));
        assert_eq!(top_label_reduce(&pv(&[0.1, 0.6, 0.3]), 2), (0.6, false));
    }

    #[test]
    fn pair_target_examples() {
        let s = sample(&[0.0, 1.0, 0.0], 1);
        assert_eq!(pair_target(&s, &s, Mode::Canonical).unwrap(), 0.0);
        assert_eq!(pair_target(&s, &s, Mode::TopLabel).unwrap(), 0.0);

        let a = sample(&[0.5, 0.5], 0);
        let b = sample(&[0.5, 0.5], 1);
        assert_eq!(pair_target(&a, &b, Mode::Canonical).unwrap(), -0.5);

        let c = sample(&[0.8, 0.2], 0);
        assert!((pair_target(&c, &c, Mode::Canonical).unwrap() - 0.08).abs() < 1e-15);

        let d = sample(&[0.2, 0.3, 0.5], 0);
        assert!(pair_target(&c, &d, Mode::Canonical).is_err());
    }

    #[test]
    fn label_out_of_range_rejected() {
        assert!(Sample::new(pv(&[0.5, 0.5]), 2).is_err());
    }

    #[test]
    fn dataset_pair_target_matches_free_function() {
        let samples = vec![sample(&[0.7, 0.2, 0.1], 0), sample(&[0.1, 0.6, 0.3], 2), sample(&[0.3, 0.3, 0.4], 1)];
        let ds = Dataset::canonical(samples.clone()).unwrap();
        let tl = ds.to_top_label();
        for i in 0..3 {
            for j in 0..3 {
                let c = pair_target(&samples[i], &samples[j], Mode::Canonical).unwrap();
                let t = pair_target(&samples[i], &samples[j], Mode::TopLabel).unwrap();
                assert_eq!(ds.pair_target(i, j), c);
                assert_eq!(tl.pair_target(i, j), t);
                let ri = ds.residual(i);
                let rj = ds.residual(j);
                assert!((dot(&ri, &rj) - c).abs() < 1e-15);
            }
        }
        assert_eq!(tl.point(0), &[0.7]);
        assert_eq!(tl.label(0), 1);
        assert_eq!(tl.label(1), 0);
    }

    #[test]
    fn dataset_rejects_ragged_and_bad_confidence() {
        let r = Dataset::canonical(vec![sample(&[0.5, 0.5], 0), sample(&[0.2, 0.3, 0.5], 0)]);
        assert!(r.is_err());
        assert!(Dataset::<f64>::canonical(vec![]).is_err());
        assert!(Dataset::top_label(vec![1.2], vec![true]).is_err());
        assert!(Dataset::top_label(vec![0.2], vec![true, false]).is_err());
    }

    #[test]
    fn f32_dataset_works() {
        let s = Sample::new(ProbVector::<f32>::new(vec![0.25, 0.75]).unwrap(), 1).unwrap();
        let ds = Dataset::canonical(vec![s.clone(), s]).unwrap();
        assert!((ds.pair_target(0, 1) - 0.125).abs() < 1e-7);
    }

    fn arb_sample(d: usize) -> impl Strategy<Value = Sample> {
        (prop::collection::vec(0.01f64..1.0, d), 0..d).prop_map(|(w, y)| {
            let total: f64 = w.iter().sum();
            let p = w.iter().map(|v| v / total).collect();
            Sample::new(ProbVector::renormalized(p, 1e-9).unwrap(), y).unwrap()
        })
    }

    proptest! {
        #[test]
        fn pair_target_symmetric_and_psd_diagonal(a in arb_sample(4), b in arb_sample(4)) {
            for mode in [Mode::Canonical, Mode::TopLabel] {
                let ab = pair_target(&a, &b, mode).unwrap();
                let ba = pair_target(&b, &a, mode).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!(pair_target(&a, &a, mode).unwrap() >= 0.0);
                let bound = if mode == Mode::Canonical { 4.0 } else { 1.0 };
                prop_assert!(ab.abs() <= bound);
            }
        }

        #[test]
        fn top_label_scalar_is_half_of_two_class_lift(a in arb_sample(5), b in arb_sample(5)) {
            let lift = |s: &Sample| {
                let (c, ok) = top_label_reduce(&s.probs, s.label);
                Sample::new(ProbVector::renormalized(vec![c, 1.0 - c], 1e-9).unwrap(), if ok { 0 } else { 1 }).unwrap()
            };
            let scalar = pair_target(&a, &b, Mode::TopLabel).unwrap();
            let vector = pair_target(&lift(&a), &lift(&b), Mode::Canonical).unwrap();
            prop_assert!((2.0 * scalar - vector).abs() < 1e-12);
        }

        #[test]
        fn residual_columns_sum_to_zero(samples in prop::collection::vec(arb_sample(3), 1..20)) {
            let ds = Dataset::canonical(samples).unwrap();
            let r = ds.residual_matrix();
            for col in r.column_iter() {
                prop_assert!(col.sum().abs() < 1e-12);
                prop_assert!(col.iter().all(|v| v.abs() <= 1.0));
            }
        }
    }
}
