//! Ground-truth simulation: Dirichlet label distributions, a temperature
//! miscalibrated model, and the one-parameter family `h_sim` that contains
//! the ideal calibration estimation function.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::CalibrationFunction;
use crate::risk::{batched_risk, RiskValue};
use crate::scalar::Scalar;
use crate::simplex::{dot, softmax_in_place, Dataset, ProbVector, Sample};

/// Probabilities are clipped to at least this before taking logs.
pub const LOG_CLIP: f64 = 1e-12;

/// Default temperature grid for risk curves.
pub const DEFAULT_THETAS: [f64; 9] = [0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.25, 1.5, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    /// Shared Dirichlet concentration of the ground-truth distributions.
    pub alpha: f64,
    /// Factor applied to the log ground truth to form the model's logits.
    pub model_temp: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n: 500, d: 5, alpha: 0.04, model_temp: 0.3, seed: 0 }
    }
}

impl SimConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d < 2 {
            return Err(Error::input("simulation needs n >= 2 and d >= 2"));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::input("alpha must be positive"));
        }
        if !(self.model_temp > 0.0) || !self.model_temp.is_finite() {
            return Err(Error::input("model temperature must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SimDataset<T: Scalar = f64> {
    /// Model predictions and sampled labels.
    pub dataset: Dataset<T>,
    /// The label distribution each sample was drawn from.
    pub ground_truth: Vec<ProbVector<T>>,
}

/// `softmax(temp * log p)` with `p` clipped at [`LOG_CLIP`].
pub fn miscalibrate<T: Scalar>(p: &[T], temp: T) -> ProbVector<T> {
    let mut v = tempered_logits(p, temp);
    softmax_in_place(&mut v);
    ProbVector::renormalized(v, T::lit(1e-6)).expect("softmax output lies on the simplex")
}

fn tempered_logits<T: Scalar>(p: &[T], temp: T) -> Vec<T> {
    let clip = T::lit(LOG_CLIP);
    p.iter().map(|&v| temp * v.max(clip).ln()).collect()
}

pub fn simulate<T: Scalar>(cfg: &SimConfig) -> Result<SimDataset<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gamma = Gamma::new(cfg.alpha, 1.0).map_err(|e| Error::input(e.to_string()))?;
    let temp = T::lit(cfg.model_temp);
    let mut samples = Vec::with_capacity(cfg.n);
    let mut truth = Vec::with_capacity(cfg.n);
    let mut draws = vec![0.0f64; cfg.d];
    for _ in 0..cfg.n {
        let total = loop {
            for g in draws.iter_mut() {
                *g = gamma.sample(&mut rng);
            }
            let total: f64 = draws.iter().sum();
            if total > 0.0 && total.is_finite() {
                break total;
            }
        };
        let p: Vec<f64> = draws.iter().map(|g| g / total).collect();
        let u: f64 = rng.gen();
        let mut label = cfg.d - 1;
        let mut cum = 0.0;
        for (k, &pk) in p.iter().enumerate() {
            cum += pk;
            if u < cum {
                label = k;
                break;
            }
        }
        let p_t: Vec<T> = p.iter().map(|&v| T::lit(v)).collect();
        let probs = miscalibrate(&p_t, temp);
        samples.push(Sample::new(probs, label)?);
        truth.push(ProbVector::renormalized(p_t, T::lit(1e-6))?);
    }
    Ok(SimDataset { dataset: Dataset::canonical(samples)?, ground_truth: truth })
}

/// `h_sim(p, p') = <p - softmax(theta / temp * log p), p' - softmax(theta / temp * log p')>`.
///
/// At `theta = 1` the inner softmax inverts the model's miscalibration, so
/// `h_sim` is the ideal estimation function for simulated data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsimModel<T: Scalar = f64> {
    theta: T,
    model_temp: T,
}

impl<T: Scalar> HsimModel<T> {
    pub fn new(theta: T, model_temp: T) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::input("theta must be finite"));
        }
        if !(model_temp > T::zero()) || !model_temp.is_finite() {
            return Err(Error::input("model temperature must be positive"));
        }
        Ok(Self { theta, model_temp })
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    fn residual(&self, p: &[T]) -> Vec<T> {
        let g = miscalibrate(p, self.theta / self.model_temp);
        p.iter().zip(g.as_slice()).map(|(&a, &b)| a - b).collect()
    }

    fn features(&self, data: &Dataset<T>) -> DMatrix<T> {
        let mut f = DMatrix::zeros(data.len(), data.dim());
        for i in 0..data.len() {
            for (k, v) in self.residual(data.point(i)).into_iter().enumerate() {
                f[(i, k)] = v;
            }
        }
        f
    }
}

/// `h_sim` at temperature `theta` for a model miscalibrated by `model_temp`.
pub fn eval_hsim<T: Scalar>(theta: T, p: &[T], p_prime: &[T], model_temp: T) -> T {
    HsimModel { theta, model_temp }.eval(p, p_prime)
}

impl<T: Scalar> CalibrationFunction<T> for HsimModel<T> {
    fn eval(&self, p: &[T], q: &[T]) -> T {
        dot(&self.residual(p), &self.residual(q))
    }

    fn eval_diagonal(&self, data: &Dataset<T>) -> Vec<T> {
        let f = self.features(data);
        f.row_iter().map(|r| r.dot(&r)).collect()
    }

    fn eval_matrix(&self, data: &Dataset<T>) -> DMatrix<T> {
        let f = self.features(data);
        &f * f.transpose()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint<T: Scalar = f64> {
    pub theta: T,
    pub risk: RiskValue<T>,
}

/// Quadratic empirical risk of `h_sim(theta)` on the whole simulated set for
/// every `theta`.
pub fn risk_curve<T: Scalar>(sim: &SimDataset<T>, thetas: &[T], model_temp: T) -> Result<Vec<CurvePoint<T>>> {
    if thetas.len() < 2 {
        return Err(Error::input("a risk curve needs at least two temperatures"));
    }
    thetas
        .iter()
        .map(|&theta| {
            let h = HsimModel::new(theta, model_temp)?;
            Ok(CurvePoint { theta, risk: batched_risk(&h, &sim.dataset)? })
        })
        .collect()
}

/// Risk curves of many simulation seeds, aggregated per temperature.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSummary {
    pub thetas: Vec<f64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation across seeds.
    pub sd: Vec<f64>,
    pub se: Vec<f64>,
    /// Seeds whose curve attains its minimum at each temperature.
    pub argmin_counts: Vec<usize>,
    pub seeds: usize,
}

impl CurveSummary {
    /// Temperature with the lowest mean risk.
    pub fn argmin(&self) -> f64 {
        let mut best = 0;
        for (k, &m) in self.mean.iter().enumerate() {
            if m < self.mean[best] {
                best = k;
            }
        }
        self.thetas[best]
    }

    /// Share of seeds whose own minimiser lies in `[lo, hi]`.
    pub fn argmin_share_in(&self, lo: f64, hi: f64) -> f64 {
        let hits: usize = self
            .thetas
            .iter()
            .zip(&self.argmin_counts)
            .filter(|(&t, _)| t >= lo && t <= hi)
            .map(|(_, &c)| c)
            .sum();
        hits as f64 / self.seeds as f64
    }
}

/// Risk curves for seeds `cfg.seed, cfg.seed + 1, ...`.
pub fn curve_summary(cfg: &SimConfig, seeds: usize, thetas: &[f64]) -> Result<CurveSummary> {
    if seeds == 0 {
        return Err(Error::input("need at least one seed"));
    }
    let m = thetas.len();
    let mut risks = Vec::with_capacity(seeds);
    let mut argmin_counts = vec![0usize; m];
    for s in 0..seeds as u64 {
        let sim: SimDataset = simulate(&cfg.with_seed(cfg.seed.wrapping_add(s)))?;
        let curve: Vec<f64> = risk_curve(&sim, thetas, cfg.model_temp)?.iter().map(|c| c.risk.value).collect();
        let mut best = 0;
        for k in 1..m {
            if curve[k] < curve[best] {
                best = k;
            }
        }
        argmin_counts[best] += 1;
        risks.push(curve);
    }
    let count = seeds as f64;
    let mean: Vec<f64> = (0..m).map(|k| risks.iter().map(|r| r[k]).sum::<f64>() / count).collect();
    let sd: Vec<f64> = (0..m)
        .map(|k| {
            if seeds < 2 {
                return 0.0;
            }
            let ss: f64 = risks.iter().map(|r| (r[k] - mean[k]).powi(2)).sum();
            (ss / (count - 1.0)).sqrt()
        })
        .collect();
    let se = sd.iter().map(|s| s / count.sqrt()).collect();
    Ok(CurveSummary { thetas: thetas.to_vec(), mean, sd, se, argmin_counts, seeds })
}
