//! Train/validate/test calibration evaluation: a seeded split, k-fold
//! cross-validated hyperparameter selection by held-out risk, and the final
//! estimate from the ensemble of fold models on the untouched test split.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use nalgebra::DMatrix;

use crate::estimators::{
    fit_binning, fit_kde, BinningModel, CalibrationFunction, GramSpectrum, KdeModel, KkrModel, UkkrModel,
};
use crate::risk::{holdout_risk, risk_from_matrix, RiskKind, RiskValue};
use crate::scalar::Scalar;
use crate::sim::{HsimModel, DEFAULT_THETAS};
use crate::simplex::{Dataset, Mode, Provenance};

/// Estimator families known to the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Equal-width binning, number of bins tuned.
    Bin,
    /// Equal-width binning fixed at 15 bins.
    Bin15,
    Kde,
    Kkr,
    Ukkr,
    /// The simulation family `h_sim`, temperature tuned.
    Sim,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Bin => "bin",
            FamilyKind::Bin15 => "bin15",
            FamilyKind::Kde => "kde",
            FamilyKind::Kkr => "kkr",
            FamilyKind::Ukkr => "ukkr",
            FamilyKind::Sim => "sim",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "bin" => FamilyKind::Bin,
            "bin15" => FamilyKind::Bin15,
            "kde" => FamilyKind::Kde,
            "kkr" => FamilyKind::Kkr,
            "ukkr" => FamilyKind::Ukkr,
            "sim" => FamilyKind::Sim,
            other => return Err(Error::input(format!("unknown estimator family `{other}`"))),
        })
    }

    /// Binning only exists for scalar confidences.
    pub fn supports(self, mode: Mode) -> bool {
        match self {
            FamilyKind::Bin | FamilyKind::Bin15 => mode == Mode::TopLabel,
            FamilyKind::Sim => mode == Mode::Canonical,
            _ => true,
        }
    }
}

/// Hyperparameter values searched for one family: number of bins, Dirichlet
/// bandwidth, ridge constant or temperature.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperGrid<T: Scalar = f64> {
    pub family: FamilyKind,
    pub values: Vec<T>,
}

impl<T: Scalar> HyperGrid<T> {
    pub fn new(family: FamilyKind, values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input(format!("empty grid for {}", family.name())));
        }
        // a zero ridge or temperature is meaningful, a zero bandwidth or bin count is not
        let zero_ok = matches!(family, FamilyKind::Kkr | FamilyKind::Ukkr | FamilyKind::Sim);
        for &v in &values {
            let in_range = if zero_ok { v >= T::zero() } else { v > T::zero() };
            if !in_range || !v.is_finite() {
                let bound = if zero_ok { "negative" } else { "not positive" };
                return Err(Error::input(format!("grid value {v} for {} is {bound}", family.name())));
            }
            if matches!(family, FamilyKind::Bin | FamilyKind::Bin15) && v.fract() != T::zero() {
                return Err(Error::input(format!("bin count {v} is not an integer")));
            }
        }
        Ok(Self { family, values })
    }

    /// Default search space for `family` on `n` tuning samples.
    pub fn default_for(family: FamilyKind, mode: Mode, n: usize) -> Self {
        let root_n = (n as f64).sqrt();
        let values: Vec<f64> = match (family, mode) {
            (FamilyKind::Bin, _) => (1..=20).map(|i| 5.0 * i as f64).collect(),
            (FamilyKind::Bin15, _) => vec![15.0],
            (FamilyKind::Kde, _) => default_bandwidths(),
            (FamilyKind::Kkr, Mode::TopLabel) => (1..=9).map(|i| root_n * 10f64.powi(-2 * i + 1)).collect(),
            (FamilyKind::Kkr, Mode::Canonical) => (1..=18).map(|i| root_n * 10f64.powi(9 - i)).collect(),
            (FamilyKind::Ukkr, Mode::TopLabel) => (1..=9).map(|i| root_n * 10f64.powi(-i)).collect(),
            (FamilyKind::Ukkr, Mode::Canonical) => {
                (1..=18).map(|i| root_n * 10f64.powf(4.5 - 0.5 * i as f64)).collect()
            }
            (FamilyKind::Sim, _) => DEFAULT_THETAS.to_vec(),
        };
        Self { family, values: values.into_iter().map(T::lit).collect() }
    }
}

/// Log-spaced bandwidths from 1e-1 down to 1e-5 plus 0.2, 0.4, ..., 1.0.
pub fn default_bandwidths() -> Vec<f64> {
    let mut v: Vec<f64> = (0..15)
        .map(|k| {
            let t = k as f64 / 14.0;
            10f64.powf(-5.0 * t - (1.0 - t))
        })
        .collect();
    v.extend((1..=5).map(|i| 0.2 * i as f64));
    v
}

/// A family of calibration estimation functions indexed by one hyperparameter.
pub trait Family<T: Scalar> {
    /// Hyperparameter-independent state of one cross-validation fold, shared
    /// across the grid.
    type Prepared;
    type Model: CalibrationFunction<T>;

    fn prepare(&self, train: &Dataset<T>, holdout: &Dataset<T>) -> Result<Self::Prepared>;

    fn fit(&self, prepared: &Self::Prepared, train: &Dataset<T>, hyper: T) -> Result<Self::Model>;

    /// Held-out risk of a model fitted from `prepared`.
    fn risk(
        &self,
        _prepared: &Self::Prepared,
        model: &Self::Model,
        holdout: &Dataset<T>,
        kind: RiskKind,
    ) -> Result<RiskValue<T>> {
        holdout_risk(model, holdout, kind)
    }

    /// Whether `a` is the simpler setting; decides exact ties in mean risk.
    fn simpler(&self, a: T, b: T) -> bool {
        a < b
    }
}

pub struct BinFamily;
pub struct KdeFamily;
pub struct KkrFamily<T: Scalar = f64> {
    pub gamma: T,
}
pub struct UkkrFamily<T: Scalar = f64> {
    pub gamma: T,
}
pub struct SimFamily<T: Scalar = f64> {
    pub model_temp: T,
}

impl<T: Scalar> Family<T> for BinFamily {
    type Prepared = ();
    type Model = BinningModel<T>;

    fn prepare(&self, _train: &Dataset<T>, _holdout: &Dataset<T>) -> Result<()> {
        Ok(())
    }

    fn fit(&self, _: &(), train: &Dataset<T>, hyper: T) -> Result<BinningModel<T>> {
        let bins = hyper.round().to_usize().ok_or_else(|| Error::input(format!("bad bin count {hyper}")))?;
        fit_binning(train, bins)
    }
}

impl<T: Scalar> Family<T> for KdeFamily {
    type Prepared = ();
    type Model = KdeModel<T>;

    fn prepare(&self, _train: &Dataset<T>, _holdout: &Dataset<T>) -> Result<()> {
        Ok(())
    }

    fn fit(&self, _: &(), train: &Dataset<T>, hyper: T) -> Result<KdeModel<T>> {
        fit_kde(train, hyper)
    }

    fn simpler(&self, a: T, b: T) -> bool {
        a > b
    }
}

/// A training fold's spectrum and its held-out points in the eigenbasis.
pub struct KkrFold<T: Scalar> {
    spectrum: Arc<GramSpectrum<T>>,
    rotated_holdout: DMatrix<T>,
}

impl<T: Scalar> Family<T> for KkrFamily<T> {
    type Prepared = KkrFold<T>;
    type Model = KkrModel<T>;

    fn prepare(&self, train: &Dataset<T>, holdout: &Dataset<T>) -> Result<KkrFold<T>> {
        let spectrum = Arc::new(GramSpectrum::new(train, self.gamma)?);
        let rotated_holdout = spectrum.rotated_cross(holdout);
        Ok(KkrFold { spectrum, rotated_holdout })
    }

    fn fit(&self, fold: &KkrFold<T>, _train: &Dataset<T>, hyper: T) -> Result<KkrModel<T>> {
        fold.spectrum.kkr(hyper)
    }

    fn risk(&self, fold: &KkrFold<T>, model: &KkrModel<T>, holdout: &Dataset<T>, kind: RiskKind) -> Result<RiskValue<T>> {
        match kind {
            RiskKind::Quadratic => {
                let b = &fold.rotated_holdout;
                risk_from_matrix(&(b.transpose() * (model.core() * b)), holdout)
            }
            RiskKind::Linear { .. } => holdout_risk(model, holdout, kind),
        }
    }

    fn simpler(&self, a: T, b: T) -> bool {
        a > b
    }
}

impl<T: Scalar> Family<T> for UkkrFamily<T> {
    type Prepared = Arc<GramSpectrum<T>>;
    type Model = UkkrModel<T>;

    fn prepare(&self, train: &Dataset<T>, _holdout: &Dataset<T>) -> Result<Self::Prepared> {
        Ok(Arc::new(GramSpectrum::new(train, self.gamma)?))
    }

    fn fit(&self, spectrum: &Self::Prepared, _train: &Dataset<T>, hyper: T) -> Result<UkkrModel<T>> {
        spectrum.ukkr(hyper)
    }

    fn simpler(&self, a: T, b: T) -> bool {
        a > b
    }
}

impl<T: Scalar> Family<T> for SimFamily<T> {
    type Prepared = ();
    type Model = HsimModel<T>;

    fn prepare(&self, _train: &Dataset<T>, _holdout: &Dataset<T>) -> Result<()> {
        Ok(())
    }

    fn fit(&self, _: &(), _train: &Dataset<T>, hyper: T) -> Result<HsimModel<T>> {
        HsimModel::new(hyper, self.model_temp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub risk: RiskKind,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { k: 5, seed: 0, risk: RiskKind::Quadratic }
    }
}

/// Held-out risks of one grid point across folds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint<T: Scalar = f64> {
    pub hyper: T,
    pub fold_risks: Vec<RiskValue<T>>,
    pub mean_risk: T,
    pub risk_se: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedPoint<T: Scalar = f64> {
    pub hyper: T,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct CvResult<T: Scalar, M> {
    pub best_hyper: T,
    /// The k models fitted at `best_hyper`, one per training fold.
    pub fold_models: Vec<M>,
    pub fold_risks: Vec<RiskValue<T>>,
    pub mean_risk: T,
    pub risk_se: T,
    /// Every grid point that could be evaluated, in grid order.
    pub grid: Vec<GridPoint<T>>,
    pub skipped: Vec<SkippedPoint<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationEstimate<T: Scalar = f64> {
    /// Mean ensemble diagonal prediction; may be negative.
    pub squared_value: T,
    /// `sqrt(max(squared_value, 0))`.
    pub value: T,
    /// Set when `squared_value < 0` and `value` was clipped to zero.
    pub clipped: bool,
    /// Standard error of the per-fold test means.
    pub fold_se: T,
    /// `(model, sample)` predictions dropped as NaN.
    pub dropped_nan: usize,
}

/// Seeded permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded shuffle-and-split into `(tune, test)` with
/// `|test| = round(test_fraction * n)`.
pub fn split_dataset<T: Scalar>(ds: &Dataset<T>, test_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    let n = ds.len();
    if n < 5 {
        return Err(Error::input(format!("need at least 5 samples to split, got {n}")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::input(format!("test fraction {test_fraction} is not in (0, 1)")));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n - n_test < 2 {
        return Err(Error::input(format!("split of {n} samples at {test_fraction} is degenerate")));
    }
    let perm = permutation(n, seed);
    let (tune, test) = perm.split_at(n - n_test);
    Ok((ds.subset(tune, Provenance::Tune), ds.subset(test, Provenance::Test)))
}

/// Seeded shuffle cut into `k` contiguous folds; the first `n % k` folds get
/// one extra sample.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let perm = permutation(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(perm[start..start + len].to_vec());
        start += len;
    }
    folds
}

pub(crate) fn mean_and_se<T: Scalar>(values: &[T]) -> (T, T) {
    let k = T::from_count(values.len());
    let mean = values.iter().fold(T::zero(), |a, &b| a + b) / k;
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let ss = values.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean));
    let sd = (ss / (k - T::one())).sqrt();
    (mean, sd / k.sqrt())
}

/// k-fold cross-validation over `grid`; keeps the fold models of the grid
/// point with the lowest mean held-out risk.
///
/// A grid point whose fit or risk fails on any fold is skipped and recorded.
/// Data tagged as a test split is refused.
pub fn cross_validate<T: Scalar, F: Family<T>>(
    tune: &Dataset<T>,
    family: &F,
    grid: &[T],
    cfg: &CvConfig,
) -> Result<CvResult<T, F::Model>> {
    if tune.provenance() == Provenance::Test {
        return Err(Error::input("cross-validation must not see the test split"));
    }
    if cfg.k < 2 {
        return Err(Error::input(format!("need at least 2 folds, got {}", cfg.k)));
    }
    if tune.len() < 2 * cfg.k {
        return Err(Error::input(format!("{} samples are too few for {} folds", tune.len(), cfg.k)));
    }
    if grid.is_empty() {
        return Err(Error::input("empty hyperparameter grid"));
    }
    let folds = fold_indices(tune.len(), cfg.k, cfg.seed);
    let splits: Vec<(Dataset<T>, Dataset<T>)> = (0..cfg.k)
        .map(|f| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            (tune.subset(&train, Provenance::Fold), tune.subset(&folds[f], Provenance::Fold))
        })
        .collect();
    let prepared: Vec<F::Prepared> =
        splits.iter().map(|(train, holdout)| family.prepare(train, holdout)).collect::<Result<_>>()?;

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let mut best: Option<(usize, Vec<F::Model>)> = None;
    for &hyper in grid {
        let evaluated: Result<Vec<(F::Model, RiskValue<T>)>> = splits
            .iter()
            .zip(&prepared)
            .map(|((train, holdout), prep)| {
                let model = family.fit(prep, train, hyper)?;
                let risk = family.risk(prep, &model, holdout, cfg.risk)?;
                if !risk.value.is_finite() {
                    return Err(Error::numeric(format!("non-finite held-out risk {}", risk.value)));
                }
                Ok((model, risk))
            })
            .collect();
        let (models, fold_risks): (Vec<_>, Vec<_>) = match evaluated {
            Ok(v) => v.into_iter().unzip(),
            Err(e) => {
                skipped.push(SkippedPoint { hyper, reason: e.to_string() });
                continue;
            }
        };
        let values: Vec<T> = fold_risks.iter().map(|r| r.value).collect();
        let (mean_risk, risk_se) = mean_and_se(&values);
        points.push(GridPoint { hyper, fold_risks, mean_risk, risk_se });
        let candidate = points.len() - 1;
        let better = match &best {
            None => true,
            Some((b, _)) => {
                let incumbent = &points[*b];
                mean_risk < incumbent.mean_risk
                    || (mean_risk == incumbent.mean_risk && family.simpler(hyper, incumbent.hyper))
            }
        };
        if better {
            best = Some((candidate, models));
        }
    }
    let Some((b, fold_models)) = best else {
        let reasons: Vec<String> = skipped.iter().map(|s| format!("{}: {}", s.hyper, s.reason)).collect();
        return Err(Error::numeric(format!("every grid point failed ({})", reasons.join("; "))));
    };
    let winner = points[b].clone();
    Ok(CvResult {
        best_hyper: winner.hyper,
        fold_models,
        fold_risks: winner.fold_risks,
        mean_risk: winner.mean_risk,
        risk_se: winner.risk_se,
        grid: points,
        skipped,
    })
}

/// Mean over test samples of the fold-averaged diagonal prediction.
///
/// NaN predictions are dropped per model; a sample counts if at least one
/// model predicts it.
pub fn final_estimate<T: Scalar, M: CalibrationFunction<T>>(
    fold_models: &[M],
    test: &Dataset<T>,
) -> Result<CalibrationEstimate<T>> {
    if fold_models.is_empty() {
        return Err(Error::input("no fold models"));
    }
    if test.is_empty() {
        return Err(Error::input("empty test set"));
    }
    let n = test.len();
    let mut sums = vec![T::zero(); n];
    let mut counts = vec![0usize; n];
    let mut fold_means = Vec::with_capacity(fold_models.len());
    let mut dropped = 0;
    for model in fold_models {
        let diag = model.eval_diagonal(test);
        let mut total = T::zero();
        let mut used = 0usize;
        for (i, v) in diag.into_iter().enumerate() {
            if v.is_nan() {
                dropped += 1;
                continue;
            }
            sums[i] += v;
            counts[i] += 1;
            total += v;
            used += 1;
        }
        if used > 0 {
            fold_means.push(total / T::from_count(used));
        }
    }
    let per_sample: Vec<T> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| s / T::from_count(c))
        .collect();
    if per_sample.is_empty() {
        return Err(Error::numeric("every test prediction was NaN"));
    }
    let squared_value = per_sample.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(per_sample.len());
    let (_, fold_se) = mean_and_se(&fold_means);
    let clipped = squared_value < T::zero();
    Ok(CalibrationEstimate {
        squared_value,
        value: squared_value.max(T::zero()).sqrt(),
        clipped,
        fold_se,
        dropped_nan: dropped,
    })
}
