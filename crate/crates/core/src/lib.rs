//! Class-prevalence estimation ("quantification").
//!
//! Given a labelled training set and an unlabelled test set whose class
//! distribution may differ from the training one (prior-probability shift),
//! the quantifiers in this crate estimate the test class distribution.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: loading, preprocessing, binning and synthetic generators.
//! - [`sampling`]: prevalence-constrained train/test draws and scenario grids.
//! - [`classifier`]: multinomial logistic regression, stratified
//!   cross-validated scores, confusion rates and ROC thresholds.
//! - [`simplex`], [`distance`], [`solver`]: scalar-generic math shared by
//!   the quantifiers.
//! - [`quantify`]: the quantifier catalogue and the one-vs-rest wrapper.
//! - [`metrics`] and [`stats`]: AE/NKLD errors, rankings, Friedman test and
//!   Nemenyi critical differences.
//! - [`oracle`]: brute-force reference implementations used to cross-check
//!   the quantifiers in tests and fixture generation.
//!
//! The formula-level modules are generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix them to `f64`, which is what the data-carrying
//! modules use.

pub mod classifier;
pub mod dataset;
pub mod distance;
mod error;
pub mod metrics;
pub mod oracle;
pub mod quantify;
pub mod sampling;
mod scalar;
pub mod simplex;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// A prevalence vector over `f64`.
pub type Prevalence = simplex::PrevalenceEstimate<f64>;
/// A distribution-matching linear system over `f64`.
pub type MatchSystem = solver::MatchSystem<f64>;

pub use classifier::{ClassifierConfig, ConfusionRates, FittedScores, LogisticRegression, RocCurve};
pub use dataset::{ColumnKind, Dataset, PreprocessPlan};
pub use quantify::{Estimate, Flags, Method, MethodParams, QuantifierSpec, Strategy};
pub use sampling::{DrawnSplit, ScenarioSpec, ShiftCategory};
pub use stats::RankReport;
