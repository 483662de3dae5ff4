//! Multinomial logistic regression and the cross-validated score machinery
//! used by every classifier-based quantifier.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Dataset, Error, Result};

/// Logistic regression hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Inverse L2 strength `C`; the penalty is `|W|^2 / (2 C n)` on the mean log-loss.
    pub regularization_weight: f64,
    pub max_iterations: usize,
    /// Stop once the largest absolute gradient entry drops below this.
    pub convergence_tolerance: f64,
    /// Stratified folds for out-of-fold scores.
    pub cv_folds: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { regularization_weight: 1.0, max_iterations: 1000, convergence_tolerance: 1e-4, cv_folds: 10 }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.regularization_weight > 0.0 && self.regularization_weight.is_finite()) {
            return Err(Error::InvalidArgument("regularization_weight must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::InvalidArgument("convergence_tolerance must be positive".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidArgument("cv_folds must be at least 2".into()));
        }
        Ok(())
    }
}

/// A fitted model producing class-probability rows.
pub trait ProbabilisticClassifier {
    fn n_classes(&self) -> usize;

    /// `n x L` matrix whose rows lie on the simplex.
    fn predict_proba(&self, features: &Array2<f64>) -> Result<Array2<f64>>;

    /// Argmax predictions, ties toward the lower class index.
    fn predict(&self, features: &Array2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(features)?))
    }
}

/// Row-wise argmax, ties toward the lower index.
pub fn argmax_rows(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Softmax regression with weights `L x (D + 1)`, intercept last.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    weights: Array2<f64>,
    iterations: usize,
    converged: bool,
    loss_trace: Vec<f64>,
}

impl LogisticRegression {
    /// All-zero weights: every prediction is uniform.
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self {
            weights: Array2::zeros((n_classes, n_features + 1)),
            iterations: 0,
            converged: false,
            loss_trace: Vec::new(),
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols() - 1
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Objective value after initialisation and after every accepted step.
    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }
}

impl ProbabilisticClassifier for LogisticRegression {
    fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    fn predict_proba(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_features() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, got {}",
                self.n_features(),
                features.ncols()
            )));
        }
        let mut z = logits(self.weights.view(), features);
        for mut row in z.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        Ok(z)
    }
}

fn logits(weights: ArrayView2<f64>, x: &Array2<f64>) -> Array2<f64> {
    let d = x.ncols();
    let coef = weights.slice(ndarray::s![.., ..d]);
    let intercept = weights.column(d);
    let mut z = x.dot(&coef.t());
    z += &intercept;
    z.as_standard_layout().into_owned()
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Regularised mean log-loss and its gradient at `params`, a row-major
/// `L x (D + 1)` weight matrix with the intercept in the last column.
pub fn logistic_objective(
    x: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    regularization_weight: f64,
    params: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (n, d) = x.dim();
    if labels.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: labels.len() });
    }
    if params.len() != n_classes * (d + 1) {
        return Err(Error::LengthMismatch { expected: n_classes * (d + 1), got: params.len() });
    }
    let weights = ArrayView2::from_shape((n_classes, d + 1), params).expect("length checked");
    Ok(objective(x, labels, weights, regularization_weight))
}

fn objective(x: &Array2<f64>, labels: &[usize], weights: ArrayView2<f64>, c: f64) -> (f64, Vec<f64>) {
    let (n, d) = x.dim();
    let nf = n as f64;
    let mut residual = logits(weights, x);
    let mut loss = 0.0;
    for (mut row, &y) in residual.rows_mut().into_iter().zip(labels) {
        let row = row.as_slice_mut().expect("standard layout");
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
        row[y] -= 1.0;
    }
    let coef = weights.slice(ndarray::s![.., ..d]);
    let penalty = coef.iter().map(|w| w * w).sum::<f64>() / (2.0 * c * nf);
    let mut grad = Array2::zeros(weights.dim());
    let coef_grad = residual.t().dot(x) / nf + &coef.mapv(|w| w / (c * nf));
    grad.slice_mut(ndarray::s![.., ..d]).assign(&coef_grad);
    grad.column_mut(d).assign(&(residual.sum_axis(Axis(0)) / nf));
    (loss / nf + penalty, grad.into_raw_vec_and_offset().0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const LBFGS_MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
/// Relative-decrease stop, matching the usual L-BFGS-B `factr` default.
const RELATIVE_DECREASE_TOL: f64 = 2.220446049250313e-9;

/// Fits with a fixed class count; classes absent from `labels` are allowed.
fn fit_with_classes(
    x: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    config: &ClassifierConfig,
) -> LogisticRegression {
    let d = x.ncols();
    let c = config.regularization_weight;
    let eval = |w: &[f64]| {
        let view = ArrayView2::from_shape((n_classes, d + 1), w).expect("parameter length");
        objective(x, labels, view, c)
    };
    let mut w = vec![0.0; n_classes * (d + 1)];
    let (mut f, mut g) = eval(&w);
    let mut trace = vec![f];
    let mut converged = inf_norm(&g) < config.convergence_tolerance;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut iterations = 0;
    while !converged && iterations < config.max_iterations {
        iterations += 1;
        // Two-loop recursion for -H g.
        let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut direction = q;
        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) || !slope.is_finite() {
            memory.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if memory.is_empty() { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = w.iter().zip(&direction).map(|(wi, di)| wi + step * di).collect();
            let (f_trial, g_trial) = eval(&trial);
            if f_trial.is_finite() && f_trial <= f + ARMIJO * step * slope {
                accepted = Some((trial, f_trial, g_trial));
                break;
            }
            step *= 0.5;
        }
        let Some((w_new, f_new, g_new)) = accepted else { break };
        let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let decrease = (f - f_new) / f.abs().max(f_new.abs()).max(1.0);
        w = w_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        converged = inf_norm(&g) < config.convergence_tolerance || decrease <= RELATIVE_DECREASE_TOL;
    }
    LogisticRegression {
        weights: Array2::from_shape_vec((n_classes, d + 1), w).expect("parameter length"),
        iterations,
        converged,
        loss_trace: trace,
    }
}

/// Fits softmax regression on all of `train`. Deterministic: starts from
/// zero weights.
pub fn fit_logistic(train: &Dataset, config: &ClassifierConfig) -> Result<LogisticRegression> {
    config.validate()?;
    if train.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    Ok(fit_with_classes(train.features(), train.labels(), train.n_classes(), config))
}

/// Stratified fold ids: each class is shuffled by its own seeded stream and
/// dealt round-robin, continuing where the previous class stopped.
pub fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = (offset + k) % folds;
        }
        offset += members.len();
    }
    assignment
}

/// Out-of-fold training scores plus the model refit on all training data.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedScores {
    oof_scores: Array2<f64>,
    oof_labels: Vec<usize>,
    fold_assignment: Vec<usize>,
    model: Option<LogisticRegression>,
    non_converged: bool,
}

impl FittedScores {
    /// Wraps externally produced out-of-fold scores (no refit model).
    pub fn from_oof(oof_scores: Array2<f64>, oof_labels: Vec<usize>) -> Result<Self> {
        if oof_scores.nrows() != oof_labels.len() {
            return Err(Error::LengthMismatch { expected: oof_scores.nrows(), got: oof_labels.len() });
        }
        if oof_scores.ncols() < 2 {
            return Err(Error::InvalidArgument("score matrix needs at least 2 columns".into()));
        }
        if oof_labels.iter().any(|&y| y >= oof_scores.ncols()) {
            return Err(Error::InvalidArgument("label outside the score columns".into()));
        }
        if oof_scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("out-of-fold scores"));
        }
        let n = oof_labels.len();
        Ok(Self { oof_scores, oof_labels, fold_assignment: vec![0; n], model: None, non_converged: false })
    }

    pub fn oof_scores(&self) -> &Array2<f64> {
        &self.oof_scores
    }

    pub fn oof_labels(&self) -> &[usize] {
        &self.oof_labels
    }

    pub fn fold_assignment(&self) -> &[usize] {
        &self.fold_assignment
    }

    pub fn model(&self) -> Option<&LogisticRegression> {
        self.model.as_ref()
    }

    pub fn n_classes(&self) -> usize {
        self.oof_scores.ncols()
    }

    /// Some fold or the refit did not reach the convergence tolerance.
    pub fn non_converged(&self) -> bool {
        self.non_converged
    }

    /// Empirical class distribution of the training labels.
    pub fn train_prevalence(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_classes()];
        for &y in &self.oof_labels {
            counts[y] += 1.0;
        }
        let n = self.oof_labels.len() as f64;
        counts.iter().map(|c| c / n).collect()
    }

    /// Scores of the refit model on `features`.
    pub fn predict_proba(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("scores carry no refit model".into()))?
            .predict_proba(features)
    }

    /// FNV-1a hash over labels and score bits; equal inputs give equal hashes
    /// across runs and platforms.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        for &y in &self.oof_labels {
            h.write(&(y as u64).to_le_bytes());
        }
        for v in &self.oof_scores {
            h.write(&v.to_bits().to_le_bytes());
        }
        h.finish()
    }
}

/// 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Fnv64 {
    pub fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

impl Default for Fnv64 {
    fn default() -> Self {
        Self::new()
    }
}

/// Stratified k-fold out-of-fold scores (`config.cv_folds`, capped at the
/// number of instances) and a final model refit on all of `train`.
pub fn cross_val_scores(train: &Dataset, config: &ClassifierConfig, seed: u64) -> Result<FittedScores> {
    config.validate()?;
    if train.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let n = train.n_instances();
    let l = train.n_classes();
    let folds = config.cv_folds.min(n);
    let assignment = stratified_folds(train.labels(), l, folds, seed);
    let mut oof = Array2::zeros((n, l));
    let mut non_converged = false;
    for fold in 0..folds {
        let held: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        if held.is_empty() {
            continue;
        }
        let kept: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let x = train.features().select(Axis(0), &kept);
        let y: Vec<usize> = kept.iter().map(|&i| train.labels()[i]).collect();
        let model = fit_with_classes(&x, &y, l, config);
        non_converged |= !model.converged();
        let scores = model.predict_proba(&train.features().select(Axis(0), &held))?;
        for (row, &i) in scores.rows().into_iter().zip(&held) {
            oof.row_mut(i).assign(&row);
        }
    }
    let model = fit_with_classes(train.features(), train.labels(), l, config);
    non_converged |= !model.converged();
    Ok(FittedScores {
        oof_scores: oof,
        oof_labels: train.labels().to_vec(),
        fold_assignment: assignment,
        model: Some(model),
        non_converged,
    })
}

/// `P(predicted = i | true = j)` from out-of-fold argmax predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionRates {
    /// `matrix[i][j]`: rate of predicting class `i` for true class `j`.
    pub matrix: Vec<Vec<f64>>,
}

impl ConfusionRates {
    /// Binary true-positive rate (class 0 is positive).
    pub fn tpr(&self) -> Option<f64> {
        (self.matrix.len() == 2).then(|| self.matrix[0][0])
    }

    /// Binary false-positive rate.
    pub fn fpr(&self) -> Option<f64> {
        (self.matrix.len() == 2).then(|| self.matrix[0][1])
    }

    /// Columns of the matrix, one per true class.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        let l = self.matrix.len();
        (0..l).map(|j| (0..l).map(|i| self.matrix[i][j]).collect()).collect()
    }
}

fn class_sizes(scores: &FittedScores) -> Result<Vec<usize>> {
    let mut counts = vec![0; scores.n_classes()];
    for &y in &scores.oof_labels {
        counts[y] += 1;
    }
    match counts.iter().position(|&c| c == 0) {
        Some(c) => Err(Error::MissingClass(c)),
        None => Ok(counts),
    }
}

pub fn confusion_rates(scores: &FittedScores) -> Result<ConfusionRates> {
    let counts = class_sizes(scores)?;
    let l = scores.n_classes();
    let mut matrix = vec![vec![0.0; l]; l];
    for (pred, &y) in argmax_rows(&scores.oof_scores).into_iter().zip(&scores.oof_labels) {
        matrix[pred][y] += 1.0;
    }
    for row in &mut matrix {
        for (v, &c) in row.iter_mut().zip(&counts) {
            *v /= c as f64;
        }
    }
    Ok(ConfusionRates { matrix })
}

/// Entry `[i][j]`: mean score for class `i` over training instances of class `j`.
pub fn class_conditional_mean_scores(scores: &FittedScores) -> Result<Vec<Vec<f64>>> {
    let counts = class_sizes(scores)?;
    let l = scores.n_classes();
    let mut matrix = vec![vec![0.0; l]; l];
    for (row, &y) in scores.oof_scores.rows().into_iter().zip(&scores.oof_labels) {
        for (i, &s) in row.iter().enumerate() {
            matrix[i][y] += s;
        }
    }
    for row in &mut matrix {
        for (v, &c) in row.iter_mut().zip(&counts) {
            *v /= c as f64;
        }
    }
    Ok(matrix)
}

/// Truncates a score to two decimals (`0.318` becomes `0.31`).
pub fn truncate_two_decimals(score: f64) -> f64 {
    (score * 100.0 + 1e-9).floor() / 100.0
}

/// Candidate thresholds (descending) with true- and false-positive rates
/// under the rule `score >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
}

impl RocCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Positive-class scores and binary labels (0 = positive).
    pub fn from_scores(scores: &[f64], positive: &[bool]) -> Result<Self> {
        if scores.len() != positive.len() {
            return Err(Error::LengthMismatch { expected: scores.len(), got: positive.len() });
        }
        let n_pos = positive.iter().filter(|&&p| p).count();
        let n_neg = positive.len() - n_pos;
        if n_pos == 0 {
            return Err(Error::MissingClass(0));
        }
        if n_neg == 0 {
            return Err(Error::MissingClass(1));
        }
        let mut thresholds: Vec<f64> = scores.iter().map(|&s| truncate_two_decimals(s)).collect();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let (tpr, fpr) = thresholds.iter().map(|&t| rates_at(scores, positive, t, n_pos, n_neg)).unzip();
        Ok(Self { thresholds, tpr, fpr })
    }
}

fn rates_at(scores: &[f64], positive: &[bool], threshold: f64, n_pos: usize, n_neg: usize) -> (f64, f64) {
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&s, &p) in scores.iter().zip(positive) {
        if s >= threshold {
            if p {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    (tp as f64 / n_pos as f64, fp as f64 / n_neg as f64)
}

/// ROC of the out-of-fold scores of `positive_class` against the rest.
pub fn roc_curve(scores: &FittedScores, positive_class: usize) -> Result<RocCurve> {
    if scores.n_classes() != 2 {
        return Err(Error::Unsupported { method: "roc", detail: format!("{} classes", scores.n_classes()) });
    }
    if positive_class >= 2 {
        return Err(Error::InvalidArgument(format!("positive class {positive_class} outside 0..2")));
    }
    let positive: Vec<bool> = scores.oof_labels.iter().map(|&y| y == positive_class).collect();
    let s: Vec<f64> = scores.oof_scores.column(positive_class).to_vec();
    RocCurve::from_scores(&s, &positive)
}

/// True- and false-positive rates of the out-of-fold scores at `threshold`.
pub fn rates_at_threshold(scores: &FittedScores, positive_class: usize, threshold: f64) -> Result<(f64, f64)> {
    let counts = class_sizes(scores)?;
    let positive: Vec<bool> = scores.oof_labels.iter().map(|&y| y == positive_class).collect();
    let s: Vec<f64> = scores.oof_scores.column(positive_class).to_vec();
    let n_pos = counts[positive_class];
    Ok(rates_at(&s, &positive, threshold, n_pos, positive.len() - n_pos))
}

/// Mean of the score rows.
pub fn mean_rows(scores: &Array2<f64>) -> Array1<f64> {
    scores.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(scores.ncols()))
}
