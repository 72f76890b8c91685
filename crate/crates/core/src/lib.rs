//! Estimators of the squared calibration error of probabilistic classifiers
//! and the pairwise risk used to tune and compare them.
//!
//! Every estimator is a symmetric function `h(p, p')` on the probability
//! simplex, fitted on labelled predictions. Its mean diagonal value on fresh
//! data estimates the squared calibration error, and its quality is measured
//! by the U-statistic risk against residual inner products
//! `<p - e_y, p' - e_y'>`.
//!
//! Computation is generic over [`Scalar`] (`f32` or `f64`).

mod error;
pub mod estimators;
pub mod io;
pub mod kernel;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod risk;
mod scalar;
pub mod sim;
mod simplex;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use estimators::{
    eval_binning, eval_kde, eval_kkr, eval_ukkr, fit_binning, fit_kde, fit_kkr, fit_ukkr, BinningModel,
    CalibrationFunction, ConstantModel, EstimatorModel, GramSpectrum, KdeModel, KkrModel, UkkrModel,
};
pub use io::{load_dataset, InputFormat};
pub use pipeline::{
    cross_validate, final_estimate, split_dataset, CalibrationEstimate, CvConfig, CvResult, Family, FamilyKind,
    HyperGrid,
};
pub use risk::{empirical_risk, empirical_risk_kkr, empirical_risk_linear, RiskKind, RiskValue};
pub use scalar::Scalar;
pub use sim::{eval_hsim, risk_curve, simulate, HsimModel, SimConfig, SimDataset};
pub use simplex::{pair_target, softmax, top_label_reduce, Dataset, Mode, ProbVector, Provenance, Sample};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type ProbVector64 = ProbVector<f64>;
pub type ProbVector32 = ProbVector<f32>;
pub type Sample64 = Sample<f64>;
pub type Sample32 = Sample<f32>;
pub type KkrModel64 = KkrModel<f64>;
pub type KkrModel32 = KkrModel<f32>;
pub type UkkrModel64 = UkkrModel<f64>;
pub type UkkrModel32 = UkkrModel<f32>;
pub type KdeModel64 = KdeModel<f64>;
pub type KdeModel32 = KdeModel<f32>;
pub type BinningModel64 = BinningModel<f64>;
pub type BinningModel32 = BinningModel<f32>;
