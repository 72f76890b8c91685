//! End-to-end evaluation runs and their machine-readable reports.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::csv_io;
use crate::pipeline::{
    cross_validate, final_estimate, split_dataset, BinFamily, CvConfig, Family, FamilyKind, HyperGrid, KdeFamily,
    KkrFamily, SimFamily, UkkrFamily,
};
use crate::risk::RiskKind;
use crate::scalar::Scalar;
use crate::simplex::{Dataset, Mode};

/// Which calibration error an evaluation targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Top-label confidence calibration error.
    Tce,
    /// Canonical calibration error.
    Cce,
}

impl Target {
    pub fn mode(self) -> Mode {
        match self {
            Target::Tce => Mode::TopLabel,
            Target::Cce => Mode::Canonical,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tce" => Ok(Target::Tce),
            "cce" => Ok(Target::Cce),
            other => Err(Error::input(format!("unknown mode `{other}`, expected tce or cce"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Target,
    pub families: Vec<FamilyKind>,
    pub test_fraction: f64,
    pub k_folds: usize,
    /// RBF bandwidth of the kernel ridge families.
    pub gamma: f64,
    pub seed: u64,
    pub risk: RiskKind,
    /// Miscalibration temperature assumed by the `sim` family.
    pub model_temp: f64,
    /// Grid overrides; families without one use their default search space.
    pub grids: BTreeMap<FamilyKind, Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Target::Tce,
            families: vec![FamilyKind::Bin15],
            test_fraction: 0.2,
            k_folds: 5,
            gamma: 0.5,
            seed: 0,
            risk: RiskKind::Quadratic,
            model_temp: 0.3,
            grids: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::input("no estimator families selected"));
        }
        for (i, f) in self.families.iter().enumerate() {
            if self.families[..i].contains(f) {
                return Err(Error::input(format!("family {} listed twice", f.name())));
            }
            if !f.supports(self.mode.mode()) {
                return Err(Error::input(format!(
                    "family {} is not available in {} mode",
                    f.name(),
                    if self.mode == Target::Tce { "tce" } else { "cce" }
                )));
            }
        }
        if self.grids.contains_key(&FamilyKind::Bin15) {
            return Err(Error::input("bin15 has a fixed bin count and takes no grid"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::input(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.model_temp > 0.0) || !self.model_temp.is_finite() {
            return Err(Error::input(format!("model temperature must be positive, got {}", self.model_temp)));
        }
        for (&family, values) in &self.grids {
            HyperGrid::new(family, values.clone())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub config: RunConfig,
    pub n_total: usize,
    pub n_tune: usize,
    pub n_test: usize,
    /// Number of classes of the input.
    pub classes: usize,
}

/// A risk value alongside its √R × 100 form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaledRisk {
    pub risk: f64,
    pub risk_se: f64,
    pub sqrt_risk_x100: f64,
    /// Delta-method standard error of `sqrt_risk_x100`.
    pub sqrt_risk_x100_se: f64,
}

impl ScaledRisk {
    fn new(risk: f64, risk_se: f64) -> Self {
        let root = risk.max(0.0).sqrt();
        let sqrt_se = if root > 0.0 { 100.0 * risk_se / (2.0 * root) } else { 0.0 };
        Self { risk, risk_se, sqrt_risk_x100: 100.0 * root, sqrt_risk_x100_se: sqrt_se }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldRisk {
    pub risk: f64,
    pub pairs_used: usize,
    pub dropped_nan: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridEntry {
    pub hyper: f64,
    pub validation: ScaledRisk,
    pub folds: Vec<FoldRisk>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedEntry {
    pub hyper: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub squared_value: f64,
    pub value: f64,
    pub clipped: bool,
    pub fold_se: f64,
    pub dropped_nan: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyReport {
    pub family: FamilyKind,
    pub best_hyper: f64,
    pub grid_searched: bool,
    /// Mean held-out risk of the selected hyperparameter across folds.
    pub validation: ScaledRisk,
    pub validation_dropped_nan: usize,
    /// Calibration error estimate on the test split.
    pub estimate: EstimateReport,
    pub grid: Vec<GridEntry>,
    pub skipped: Vec<SkippedEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub metadata: Metadata,
    pub families: Vec<FamilyReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per (family, hyperparameter, fold) held-out risk.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["family", "hyper", "fold", "risk", "pairs_used", "dropped_nan"]).map_err(csv_io)?;
        for fam in &self.families {
            for entry in &fam.grid {
                for (k, fold) in entry.folds.iter().enumerate() {
                    w.write_record([
                        fam.family.name().to_string(),
                        entry.hyper.to_string(),
                        k.to_string(),
                        fold.risk.to_string(),
                        fold.pairs_used.to_string(),
                        fold.dropped_nan.to_string(),
                    ])
                    .map_err(csv_io)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn attribute(family: FamilyKind, e: Error) -> Error {
    let name = family.name();
    match e {
        Error::Input(m) => Error::Input(format!("{name}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{name}: {m}")),
        Error::Parse { line, message } => Error::Parse { line, message: format!("{name}: {message}") },
        other => other,
    }
}

fn f64_of<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn evaluate_family<T: Scalar, F: Family<T>>(
    kind: FamilyKind,
    family: &F,
    grid: &[T],
    tune: &Dataset<T>,
    test: &Dataset<T>,
    cv: &CvConfig,
) -> Result<FamilyReport> {
    let result = cross_validate(tune, family, grid, cv)?;
    let estimate = final_estimate(&result.fold_models, test)?;
    let folds = |risks: &[crate::risk::RiskValue<T>]| -> Vec<FoldRisk> {
        risks
            .iter()
            .map(|r| FoldRisk { risk: f64_of(r.value), pairs_used: r.pairs_used, dropped_nan: r.dropped_nan })
            .collect()
    };
    Ok(FamilyReport {
        family: kind,
        best_hyper: f64_of(result.best_hyper),
        grid_searched: kind != FamilyKind::Bin15,
        validation: ScaledRisk::new(f64_of(result.mean_risk), f64_of(result.risk_se)),
        validation_dropped_nan: result.fold_risks.iter().map(|r| r.dropped_nan).sum(),
        estimate: EstimateReport {
            squared_value: f64_of(estimate.squared_value),
            value: f64_of(estimate.value),
            clipped: estimate.clipped,
            fold_se: f64_of(estimate.fold_se),
            dropped_nan: estimate.dropped_nan,
        },
        grid: result
            .grid
            .iter()
            .map(|g| GridEntry {
                hyper: f64_of(g.hyper),
                validation: ScaledRisk::new(f64_of(g.mean_risk), f64_of(g.risk_se)),
                folds: folds(&g.fold_risks),
            })
            .collect(),
        skipped: result.skipped.iter().map(|s| SkippedEntry { hyper: f64_of(s.hyper), reason: s.reason.clone() }).collect(),
    })
}

/// Split, cross-validate every family on the tune split and estimate the
/// calibration error on the test split.
///
/// In `tce` mode a canonical dataset is reduced to top-label form first.
pub fn run_evaluate<T: Scalar>(cfg: &RunConfig, ds: &Dataset<T>) -> Result<Report> {
    cfg.validate()?;
    let classes = ds.dim();
    let data = match (cfg.mode, ds.mode()) {
        (Target::Tce, Mode::Canonical) => ds.to_top_label(),
        (Target::Tce, Mode::TopLabel) => ds.clone(),
        (Target::Cce, Mode::Canonical) => ds.clone(),
        (Target::Cce, Mode::TopLabel) => {
            return Err(Error::input("cce mode needs full probability vectors"));
        }
    };
    let (tune, test) = split_dataset(&data, cfg.test_fraction, cfg.seed)?;
    let cv = CvConfig { k: cfg.k_folds, seed: cfg.seed, risk: cfg.risk };
    let mode = cfg.mode.mode();
    let gamma = T::lit(cfg.gamma);
    let mut families = Vec::with_capacity(cfg.families.len());
    for &kind in &cfg.families {
        let grid: Vec<T> = match cfg.grids.get(&kind) {
            Some(values) => values.iter().map(|&v| T::lit(v)).collect(),
            None => HyperGrid::<T>::default_for(kind, mode, tune.len()).values,
        };
        let report = match kind {
            FamilyKind::Bin | FamilyKind::Bin15 => evaluate_family(kind, &BinFamily, &grid, &tune, &test, &cv),
            FamilyKind::Kde => evaluate_family(kind, &KdeFamily, &grid, &tune, &test, &cv),
            FamilyKind::Kkr => evaluate_family(kind, &KkrFamily { gamma }, &grid, &tune, &test, &cv),
            FamilyKind::Ukkr => evaluate_family(kind, &UkkrFamily { gamma }, &grid, &tune, &test, &cv),
            FamilyKind::Sim => {
                let sim = SimFamily { model_temp: T::lit(cfg.model_temp) };
                evaluate_family(kind, &sim, &grid, &tune, &test, &cv)
            }
        }
        .map_err(|e| attribute(kind, e))?;
        families.push(report);
    }
    Ok(Report {
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.clone(),
            n_total: data.len(),
            n_tune: tune.len(),
            n_test: test.len(),
            classes,
        },
        families,
    })
}
