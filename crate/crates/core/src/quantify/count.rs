//! Classify-and-count and the adjusted-count family.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Estimate, Flags};
use crate::classifier::{
    argmax_rows, class_conditional_mean_scores, confusion_rates, roc_curve, FittedScores, RocCurve,
};
use crate::simplex::clip_to_unit;
use crate::{Error, Prevalence, Result, Scalar};

/// Distribution of argmax predictions.
pub fn cc(test_scores: &Array2<f64>) -> Result<Prevalence> {
    if test_scores.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test scores)"));
    }
    let mut counts = vec![0; test_scores.ncols()];
    for y in argmax_rows(test_scores) {
        counts[y] += 1;
    }
    Prevalence::from_counts(&counts)
}

/// Adjusted count: `(ppos - fpr) / (tpr - fpr)` clipped to `[0, 1]`.
pub fn ac<T: Scalar>(ppos: T, tpr: T, fpr: T) -> Result<T> {
    let denominator = tpr - fpr;
    if denominator == T::zero() {
        return Err(Error::DegenerateDenominator);
    }
    clip_to_unit((ppos - fpr) / denominator)
}

/// Probabilistic adjusted count from class-conditional mean scores.
pub fn pac<T: Scalar>(mean_test_score: T, mean_score_given_pos: T, mean_score_given_neg: T) -> Result<T> {
    ac(mean_test_score, mean_score_given_pos, mean_score_given_neg)
}

fn require_binary(scores: &FittedScores, test_scores: &Array2<f64>, method: &'static str) -> Result<()> {
    if scores.n_classes() != 2 || test_scores.ncols() != 2 {
        return Err(Error::Unsupported { method, detail: "needs a binary problem".into() });
    }
    if test_scores.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test scores)"));
    }
    Ok(())
}

/// Applies the adjustment, falling back to the unadjusted rate when the
/// denominator vanishes.
fn adjusted(ppos: f64, tpr: f64, fpr: f64) -> Result<Estimate> {
    let mut flags = Flags::default();
    let positive = if tpr == fpr {
        flags.fallback = true;
        ppos
    } else {
        let raw = (ppos - fpr) / (tpr - fpr);
        flags.clipped = !(0.0..=1.0).contains(&raw);
        clip_to_unit(raw)?
    };
    Ok(Estimate::new(Prevalence::binary(positive), flags))
}

/// AC with tpr/fpr from out-of-fold argmax predictions.
pub fn acc_quantify(scores: &FittedScores, test_scores: &Array2<f64>) -> Result<Estimate> {
    require_binary(scores, test_scores, "acc")?;
    let rates = confusion_rates(scores)?;
    let ppos = cc(test_scores)?.get(0);
    adjusted(ppos, rates.matrix[0][0], rates.matrix[0][1])
}

/// PAC with the mean positive test score as the observed rate.
pub fn pacc_quantify(scores: &FittedScores, test_scores: &Array2<f64>) -> Result<Estimate> {
    require_binary(scores, test_scores, "pacc")?;
    let means = class_conditional_mean_scores(scores)?;
    let mean_test = test_scores.column(0).mean().unwrap_or(0.0);
    adjusted(mean_test, means[0][0], means[0][1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// `fpr = 1 - tpr`.
    Tsx,
    /// `tpr = 0.5`.
    Ts50,
    /// Largest `tpr - fpr`.
    Tsmax,
    /// Median of the estimates at every sufficiently separating threshold.
    Ms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub kind: PolicyKind,
    /// Smallest `tpr - fpr` that median sweep keeps.
    pub ms_denominator_floor: f64,
}

impl ThresholdPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, ms_denominator_floor: 0.25 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ms_denominator_floor > 0.0 && self.ms_denominator_floor <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ms_denominator_floor {} outside (0, 1]",
                self.ms_denominator_floor
            )));
        }
        Ok(())
    }
}

/// Index of the threshold chosen by `policy`; ties go to the higher
/// threshold. Median sweep selects like tsmax here.
pub fn select_threshold(roc: &RocCurve, policy: ThresholdPolicy) -> Result<usize> {
    if roc.is_empty() {
        return Err(Error::InvalidArgument("empty ROC curve".into()));
    }
    // Lower cost is better; thresholds are descending so the first minimum
    // is the highest threshold.
    let cost = |i: usize| match policy.kind {
        PolicyKind::Tsmax | PolicyKind::Ms => -(roc.tpr[i] - roc.fpr[i]),
        PolicyKind::Tsx => (roc.fpr[i] - (1.0 - roc.tpr[i])).abs(),
        PolicyKind::Ts50 => (roc.tpr[i] - 0.5).abs(),
    };
    let mut best = 0;
    for i in 1..roc.len() {
        if cost(i) < cost(best) {
            best = i;
        }
    }
    Ok(best)
}

fn positive_rate(test_scores: &Array2<f64>, threshold: f64) -> f64 {
    let n = test_scores.nrows() as f64;
    test_scores.column(0).iter().filter(|&&s| s >= threshold).count() as f64 / n
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Threshold-policy adjusted count on binary scores (class 0 positive).
/// Rates come from the out-of-fold scores, the observed rate from the test
/// scores.
pub fn threshold_quantify(
    scores: &FittedScores,
    test_scores: &Array2<f64>,
    policy: ThresholdPolicy,
) -> Result<Estimate> {
    require_binary(scores, test_scores, "threshold policy")?;
    policy.validate()?;
    let roc = roc_curve(scores, 0)?;
    if policy.kind == PolicyKind::Ms {
        let mut raw: Vec<f64> = (0..roc.len())
            .filter(|&i| roc.tpr[i] - roc.fpr[i] >= policy.ms_denominator_floor)
            .map(|i| (positive_rate(test_scores, roc.thresholds[i]) - roc.fpr[i]) / (roc.tpr[i] - roc.fpr[i]))
            .collect();
        if !raw.is_empty() {
            let m = median(&mut raw);
            let flags = Flags { clipped: !(0.0..=1.0).contains(&m), ..Flags::default() };
            return Ok(Estimate::new(Prevalence::binary(clip_to_unit(m)?), flags));
        }
        let mut estimate =
            threshold_quantify(scores, test_scores, ThresholdPolicy { kind: PolicyKind::Tsmax, ..policy })?;
        estimate.flags.fallback = true;
        return Ok(estimate);
    }
    let i = select_threshold(&roc, policy)?;
    adjusted(positive_rate(test_scores, roc.thresholds[i]), roc.tpr[i], roc.fpr[i])
}
