//! Quantifier catalogue, dispatch and the one-vs-rest wrapper.

pub mod clf;
pub mod count;
pub mod dm;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use self::count::{PolicyKind, ThresholdPolicy};
use self::dm::ReadmeParams;
use crate::classifier::{cross_val_scores, ClassifierConfig, FittedScores, Fnv64};
use crate::dataset::{apply_preprocess, fit_preprocess, PreprocessPlan};
use crate::simplex::ovr_combine;
use crate::{Dataset, Error, Prevalence, Result};

/// Implemented quantification methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Cc,
    Acc,
    Pcc,
    Pacc,
    Tsx,
    Ts50,
    Tsmax,
    Ms,
    Gac,
    Gpac,
    Dys,
    Fmm,
    Readme,
    Hdx,
    Hdy,
    Fm,
    Ed,
    Em,
    Cde,
    Pwk,
}

/// How a method handles more than two classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulticlassSupport {
    /// Solves the multiclass problem directly.
    Native,
    /// Binary method; multiclass only through one-vs-rest.
    OneVsRest,
    /// Binary problems only.
    BinaryOnly,
}

impl Method {
    pub const ALL: [Method; 20] = [
        Method::Cc,
        Method::Acc,
        Method::Pcc,
        Method::Pacc,
        Method::Tsx,
        Method::Ts50,
        Method::Tsmax,
        Method::Ms,
        Method::Gac,
        Method::Gpac,
        Method::Dys,
        Method::Fmm,
        Method::Readme,
        Method::Hdx,
        Method::Hdy,
        Method::Fm,
        Method::Ed,
        Method::Em,
        Method::Cde,
        Method::Pwk,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Cc => "cc",
            Method::Acc => "acc",
            Method::Pcc => "pcc",
            Method::Pacc => "pacc",
            Method::Tsx => "tsx",
            Method::Ts50 => "ts50",
            Method::Tsmax => "tsmax",
            Method::Ms => "ms",
            Method::Gac => "gac",
            Method::Gpac => "gpac",
            Method::Dys => "dys",
            Method::Fmm => "fmm",
            Method::Readme => "readme",
            Method::Hdx => "hdx",
            Method::Hdy => "hdy",
            Method::Fm => "fm",
            Method::Ed => "ed",
            Method::Em => "em",
            Method::Cde => "cde",
            Method::Pwk => "pwk",
        }
    }

    pub fn multiclass_support(self) -> MulticlassSupport {
        use Method::*;
        match self {
            Acc | Pacc | Tsx | Ts50 | Tsmax | Ms | Dys | Fmm => MulticlassSupport::OneVsRest,
            Cde => MulticlassSupport::BinaryOnly,
            Cc | Pcc | Gac | Gpac | Readme | Hdx | Hdy | Fm | Ed | Em | Pwk => MulticlassSupport::Native,
        }
    }

    /// Whether the method consumes classifier scores.
    pub fn uses_classifier(self) -> bool {
        !matches!(self, Method::Readme | Method::Hdx | Method::Ed | Method::Pwk)
    }

    /// Strategy used when none is requested: one-vs-rest where required.
    pub fn default_strategy(self, n_classes: usize) -> Strategy {
        if n_classes > 2 && self.multiclass_support() == MulticlassSupport::OneVsRest {
            Strategy::Ovr
        } else {
            Strategy::Native
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.id().to_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Native,
    Ovr,
}

/// Method hyperparameters; defaults follow the benchmark protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    pub ms_denominator_floor: f64,
    pub dys_bins: usize,
    pub fmm_bins: usize,
    /// Equal-frequency bins per continuous feature for HDx and readme.
    pub feature_bins: usize,
    pub readme_subsets: usize,
    pub readme_subset_size: Option<usize>,
    pub readme_cell_cap: usize,
    pub em_epsilon: f64,
    pub max_iterations: usize,
    pub pwk_k: usize,
    pub pwk_alpha: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            ms_denominator_floor: 0.25,
            dys_bins: 10,
            fmm_bins: 100,
            feature_bins: 10,
            readme_subsets: 50,
            readme_subset_size: None,
            readme_cell_cap: 4096,
            em_epsilon: 1e-6,
            max_iterations: 1000,
            pwk_k: 10,
            pwk_alpha: 1.0,
        }
    }
}

impl MethodParams {
    pub fn validate(&self) -> Result<()> {
        ThresholdPolicy { kind: PolicyKind::Ms, ms_denominator_floor: self.ms_denominator_floor }.validate()?;
        if self.dys_bins < 2 || self.fmm_bins < 2 || self.feature_bins < 2 {
            return Err(Error::InvalidArgument("bin counts must be at least 2".into()));
        }
        if self.readme_subsets == 0 || self.readme_cell_cap == 0 {
            return Err(Error::InvalidArgument("readme subsets and cell cap must be positive".into()));
        }
        if !(self.em_epsilon >= 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidArgument("iteration limits must be positive".into()));
        }
        if self.pwk_k == 0 || !(self.pwk_alpha > 0.0) {
            return Err(Error::InvalidArgument("pwk_k and pwk_alpha must be positive".into()));
        }
        Ok(())
    }
}

/// A method with its hyperparameters, classifier and multiclass strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantifierSpec {
    pub method: Method,
    pub params: MethodParams,
    pub classifier: ClassifierConfig,
    pub strategy: Strategy,
}

impl QuantifierSpec {
    /// Default parameters and the default strategy for `n_classes`.
    pub fn new(method: Method, n_classes: usize) -> Self {
        Self {
            method,
            params: MethodParams::default(),
            classifier: ClassifierConfig::default(),
            strategy: method.default_strategy(n_classes),
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Checks the strategy against the class count: one-vs-rest methods
    /// need `ovr` beyond two classes, native methods never take `ovr`, and
    /// CDE is binary only.
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        self.params.validate()?;
        self.classifier.validate()?;
        let unsupported = |detail: String| Error::Unsupported { method: self.method.id(), detail };
        match (self.method.multiclass_support(), self.strategy) {
            (MulticlassSupport::BinaryOnly, _) if n_classes > 2 => {
                Err(unsupported(format!("binary only, got {n_classes} classes")))
            }
            (MulticlassSupport::BinaryOnly | MulticlassSupport::Native, Strategy::Ovr) => {
                Err(unsupported("one-vs-rest is not offered for this method".into()))
            }
            (MulticlassSupport::OneVsRest, Strategy::Native) if n_classes > 2 => {
                Err(unsupported(format!("needs the ovr strategy for {n_classes} classes")))
            }
            _ => Ok(()),
        }
    }
}

/// Diagnostics attached to an estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    /// A raw estimate left `[0, 1]` (or the simplex) and was clipped.
    pub clipped: bool,
    /// An iteration or classifier fit hit its limit.
    pub non_converged: bool,
    /// A degenerate case was handled by the documented fallback.
    pub fallback: bool,
}

impl Flags {
    pub fn merge(self, other: Flags) -> Flags {
        Flags {
            clipped: self.clipped || other.clipped,
            non_converged: self.non_converged || other.non_converged,
            fallback: self.fallback || other.fallback,
        }
    }
}

/// A prevalence estimate with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub prevalence: Prevalence,
    pub flags: Flags,
    /// Fingerprint of the classifier scores used, if any.
    pub scores_hash: Option<u64>,
}

impl Estimate {
    pub fn new(prevalence: Prevalence, flags: Flags) -> Self {
        Self { prevalence, flags, scores_hash: None }
    }
}

/// Out-of-fold training scores and refit-model test scores.
#[derive(Debug, Clone)]
pub struct ScoredProblem {
    pub scores: FittedScores,
    pub test_scores: Array2<f64>,
}

type Cached<T> = OnceLock<std::result::Result<T, String>>;

fn cached<T>(cell: &Cached<T>, init: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(|| init().map_err(|e| e.to_string())).as_ref().map_err(|msg| Error::Upstream(msg.clone()))
}

/// Per-draw work shared between methods: preprocessing, cross-validated
/// scores and the one-vs-rest sub-problems are computed once and reused.
pub struct DrawContext<'a> {
    train: &'a Dataset,
    test_features: &'a Array2<f64>,
    classifier: ClassifierConfig,
    feature_bins: usize,
    seed: u64,
    standardized: Cached<(PreprocessPlan, Dataset, Array2<f64>)>,
    binned: Cached<(Dataset, Array2<f64>)>,
    scored: Cached<ScoredProblem>,
    one_vs_rest: Vec<Cached<ScoredProblem>>,
}

impl<'a> DrawContext<'a> {
    /// `seed` drives the cross-validation folds and readme's subsets.
    pub fn new(
        train: &'a Dataset,
        test_features: &'a Array2<f64>,
        classifier: ClassifierConfig,
        feature_bins: usize,
        seed: u64,
    ) -> Result<Self> {
        if test_features.nrows() == 0 {
            return Err(Error::EmptyDataset(" (test features)"));
        }
        if test_features.ncols() != train.n_features() {
            return Err(Error::SchemaMismatch("train and test feature widths differ".into()));
        }
        Ok(Self {
            train,
            test_features,
            classifier,
            feature_bins,
            seed,
            standardized: OnceLock::new(),
            binned: OnceLock::new(),
            scored: OnceLock::new(),
            one_vs_rest: (0..train.n_classes()).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.train.n_classes()
    }

    fn standardized(&self) -> Result<&(PreprocessPlan, Dataset, Array2<f64>)> {
        cached(&self.standardized, || {
            let plan = fit_preprocess(self.train, false, 10)?;
            let train = apply_preprocess(&plan, self.train)?;
            let test = plan.transform(self.test_features)?;
            Ok((plan, train, test))
        })
    }

    fn binned(&self) -> Result<&(Dataset, Array2<f64>)> {
        cached(&self.binned, || {
            let plan = fit_preprocess(self.train, true, self.feature_bins)?;
            Ok((apply_preprocess(&plan, self.train)?, plan.transform(self.test_features)?))
        })
    }

    fn score(&self, train: &Dataset, test: &Array2<f64>) -> Result<ScoredProblem> {
        let scores = cross_val_scores(train, &self.classifier, self.seed)?;
        let test_scores = scores.predict_proba(test)?;
        Ok(ScoredProblem { scores, test_scores })
    }

    /// Scores of the native problem (class 0 positive when binary).
    pub fn scored(&self) -> Result<&ScoredProblem> {
        cached(&self.scored, || {
            let (_, train, test) = self.standardized()?;
            self.score(train, test)
        })
    }

    /// Scores of the binary problem "`class` versus the rest", with `class`
    /// relabelled as 0.
    pub fn one_vs_rest(&self, class: usize) -> Result<&ScoredProblem> {
        let cell = self
            .one_vs_rest
            .get(class)
            .ok_or_else(|| Error::InvalidArgument(format!("class {class} outside 0..{}", self.n_classes())))?;
        cached(cell, || {
            let (_, train, test) = self.standardized()?;
            self.score(&train.one_vs_rest(class)?, test)
        })
    }

    /// Runs `spec`. Specs whose classifier configuration differs from the
    /// context's are scored in a fresh context.
    pub fn quantify(&self, spec: &QuantifierSpec) -> Result<Estimate> {
        let l = self.n_classes();
        spec.validate(l)?;
        if spec.method.uses_classifier() && spec.classifier != self.classifier
            || spec.params.feature_bins != self.feature_bins
        {
            let fresh = DrawContext::new(
                self.train,
                self.test_features,
                spec.classifier.clone(),
                spec.params.feature_bins,
                self.seed,
            )?;
            return fresh.quantify(spec);
        }
        match spec.strategy {
            Strategy::Native => self.native(spec),
            Strategy::Ovr => {
                let mut positives = Vec::with_capacity(l);
                let mut flags = Flags::default();
                let mut hash = Fnv64::new();
                for class in 0..l {
                    let problem = self.one_vs_rest(class)?;
                    let estimate = binary_on_scores(spec, problem)?;
                    positives.push(estimate.prevalence.get(0));
                    flags = flags.merge(estimate.flags);
                    hash.write(&problem.scores.fingerprint().to_le_bytes());
                }
                let mut estimate = Estimate::new(ovr_combine(&positives)?, flags);
                estimate.scores_hash = Some(hash.finish());
                Ok(estimate)
            }
        }
    }

    fn native(&self, spec: &QuantifierSpec) -> Result<Estimate> {
        let p = &spec.params;
        match spec.method {
            Method::Pwk => {
                let (_, train, test) = self.standardized()?;
                let prevalence =
                    clf::pwk(train.features(), train.labels(), train.n_classes(), test, p.pwk_k, p.pwk_alpha)?;
                Ok(Estimate::new(prevalence, Flags::default()))
            }
            Method::Ed => {
                let (_, train, test) = self.standardized()?;
                dm::energy_distance_quantify(train, test)
            }
            Method::Hdx => {
                let (train, test) = self.binned()?;
                dm::hdx(train, test)
            }
            Method::Readme => {
                let (train, test) = self.binned()?;
                let params = ReadmeParams {
                    subsets: p.readme_subsets,
                    subset_size: p.readme_subset_size,
                    cell_cap: p.readme_cell_cap,
                    seed: self.seed,
                };
                dm::readme(train, test, &params)
            }
            _ => {
                let problem = self.scored()?;
                let mut estimate = if self.n_classes() == 2 {
                    binary_on_scores(spec, problem)?
                } else {
                    multiclass_on_scores(spec, problem)?
                };
                estimate.scores_hash = Some(problem.scores.fingerprint());
                Ok(estimate)
            }
        }
    }
}

fn with_fit_flag(mut estimate: Estimate, problem: &ScoredProblem) -> Estimate {
    estimate.flags.non_converged |= problem.scores.non_converged();
    estimate
}

/// Score-based methods on a binary problem whose positive class is 0.
fn binary_on_scores(spec: &QuantifierSpec, problem: &ScoredProblem) -> Result<Estimate> {
    let p = &spec.params;
    let (scores, test) = (&problem.scores, &problem.test_scores);
    let policy = |kind| ThresholdPolicy { kind, ms_denominator_floor: p.ms_denominator_floor };
    let estimate = match spec.method {
        Method::Acc => count::acc_quantify(scores, test)?,
        Method::Pacc => count::pacc_quantify(scores, test)?,
        Method::Tsx => count::threshold_quantify(scores, test, policy(PolicyKind::Tsx))?,
        Method::Ts50 => count::threshold_quantify(scores, test, policy(PolicyKind::Ts50))?,
        Method::Tsmax => count::threshold_quantify(scores, test, policy(PolicyKind::Tsmax))?,
        Method::Ms => count::threshold_quantify(scores, test, policy(PolicyKind::Ms))?,
        Method::Dys => dm::dys(scores, test, p.dys_bins)?,
        Method::Fmm => dm::fmm(scores, test, p.fmm_bins)?,
        Method::Cde => {
            let (state, flags) = dm::cde_iterate(scores, test, p.em_epsilon, p.max_iterations)?;
            Estimate::new(state.estimate, flags)
        }
        _ => multiclass_on_scores(spec, problem)?,
    };
    Ok(with_fit_flag(estimate, problem))
}

/// Score-based methods that handle any class count.
fn multiclass_on_scores(spec: &QuantifierSpec, problem: &ScoredProblem) -> Result<Estimate> {
    let p = &spec.params;
    let (scores, test) = (&problem.scores, &problem.test_scores);
    let estimate = match spec.method {
        Method::Cc => Estimate::new(count::cc(test)?, Flags::default()),
        Method::Pcc => Estimate::new(clf::pcc(test)?, Flags::default()),
        Method::Gac => dm::gac(scores, test)?,
        Method::Gpac => dm::gpac(scores, test)?,
        Method::Hdy => dm::hdy(scores, test)?,
        Method::Fm => dm::fm(scores, test)?,
        Method::Em => {
            let state = dm::em_quantify(&scores.train_prevalence(), test, p.em_epsilon, p.max_iterations)?;
            Estimate::new(state.estimate, Flags { non_converged: !state.converged, ..Flags::default() })
        }
        other => {
            return Err(Error::Unsupported { method: other.id(), detail: format!("{} classes", scores.n_classes()) })
        }
    };
    Ok(with_fit_flag(estimate, problem))
}

/// Estimates the class distribution of `test_features` with `spec`,
/// training on `train` (raw features; preprocessing is fitted here).
pub fn quantify(spec: &QuantifierSpec, train: &Dataset, test_features: &Array2<f64>, seed: u64) -> Result<Estimate> {
    DrawContext::new(train, test_features, spec.classifier.clone(), spec.params.feature_bins, seed)?.quantify(spec)
}
