//! Distribution-matching quantifiers: the test representation is matched
//! by a prevalence-weighted mixture of class-conditional training
//! representations.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::count::{ac, cc};
use super::{Estimate, Flags};
use crate::classifier::{
    class_conditional_mean_scores, confusion_rates, mean_rows, rates_at_threshold, truncate_two_decimals, FittedScores,
};
use crate::dataset::ColumnKind;
use crate::distance::{hellinger, Distance};
use crate::simplex::{clip_to_unit, project_to_simplex};
use crate::solver::{
    least_squares, minimize_on_simplex, minimize_simplex_quadratic, solve_simplex_least_squares, ternary_search,
};
use crate::{Dataset, Error, MatchSystem, Prevalence, Result};

/// Uniform-bin histograms of positive-class scores on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedScoreHist {
    pub bins: usize,
    /// Training instances of the positive class.
    pub positive: Vec<f64>,
    /// Training instances of the negative class.
    pub negative: Vec<f64>,
    pub test: Vec<f64>,
}

/// Normalised histogram over `bins` equal-width bins of `[0, 1]`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        let b = ((v * bins as f64 + 1e-9).floor().max(0.0) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    let n = values.len().max(1) as f64;
    h.iter_mut().for_each(|c| *c /= n);
    h
}

impl BinnedScoreHist {
    pub fn new(bins: usize, positive: Vec<f64>, negative: Vec<f64>, test: Vec<f64>) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
        }
        for h in [&positive, &negative, &test] {
            if h.len() != bins {
                return Err(Error::LengthMismatch { expected: bins, got: h.len() });
            }
            Prevalence::new(h.clone())?;
        }
        Ok(Self { bins, positive, negative, test })
    }

    /// Bins out-of-fold and test scores of class 0, optionally truncating
    /// them to two decimals first.
    pub fn from_scores(scores: &FittedScores, test_scores: &Array2<f64>, bins: usize, truncate: bool) -> Result<Self> {
        if scores.n_classes() != 2 || test_scores.ncols() != 2 {
            return Err(Error::Unsupported { method: "score histogram", detail: "needs a binary problem".into() });
        }
        let prep = |s: f64| if truncate { truncate_two_decimals(s) } else { s };
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (row, &y) in scores.oof_scores().rows().into_iter().zip(scores.oof_labels()) {
            if y == 0 {
                pos.push(prep(row[0]));
            } else {
                neg.push(prep(row[0]));
            }
        }
        if pos.is_empty() {
            return Err(Error::MissingClass(0));
        }
        if neg.is_empty() {
            return Err(Error::MissingClass(1));
        }
        if test_scores.nrows() == 0 {
            return Err(Error::EmptyDataset(" (test scores)"));
        }
        let test: Vec<f64> = test_scores.column(0).iter().map(|&s| prep(s)).collect();
        Self::new(bins, histogram(&pos, bins), histogram(&neg, bins), histogram(&test, bins))
    }

    fn mix(&self, alpha: f64) -> Vec<f64> {
        self.positive.iter().zip(&self.negative).map(|(p, n)| alpha * p + (1.0 - alpha) * n).collect()
    }
}

/// Weight of the positive histogram minimising `distance(mixture, test)`.
/// Topsøe uses 64 ternary-search steps; L1 is piecewise linear, so a
/// 1001-point scan is refined over the kinks next to the best grid point.
pub fn mixture_search_binary(hist: &BinnedScoreHist, distance: Distance) -> f64 {
    let objective = |a: f64| distance.eval(&hist.mix(a), &hist.test);
    match distance {
        Distance::L1 => {
            let mut best = 0.0;
            let mut best_value = f64::INFINITY;
            for i in 0..=1000 {
                let a = i as f64 / 1000.0;
                let v = objective(a);
                if v < best_value {
                    best_value = v;
                    best = a;
                }
            }
            let grid_best = best;
            for ((p, n), t) in hist.positive.iter().zip(&hist.negative).zip(&hist.test) {
                if p == n {
                    continue;
                }
                let kink = (t - n) / (p - n);
                if (0.0..=1.0).contains(&kink) && (kink - grid_best).abs() <= 1e-3 + 1e-12 {
                    let v = objective(kink);
                    if v < best_value || (v == best_value && (kink - grid_best).abs() < (best - grid_best).abs()) {
                        best_value = v;
                        best = kink;
                    }
                }
            }
            best
        }
        _ => ternary_search(objective, 0.0, 1.0, 64),
    }
}

fn binary_from_alpha(alpha: f64) -> Estimate {
    Estimate::new(Prevalence::binary(alpha.clamp(0.0, 1.0)), Flags::default())
}

/// Topsøe-distance matching of score histograms.
pub fn dys(scores: &FittedScores, test_scores: &Array2<f64>, bins: usize) -> Result<Estimate> {
    let hist = BinnedScoreHist::from_scores(scores, test_scores, bins, false)?;
    Ok(binary_from_alpha(mixture_search_binary(&hist, Distance::Topsoe)))
}

/// L1 matching of many-bin histograms of two-decimal scores.
pub fn fmm(scores: &FittedScores, test_scores: &Array2<f64>, bins: usize) -> Result<Estimate> {
    let hist = BinnedScoreHist::from_scores(scores, test_scores, bins, true)?;
    Ok(binary_from_alpha(mixture_search_binary(&hist, Distance::L1)))
}

fn check_test(scores: &FittedScores, test_scores: &Array2<f64>) -> Result<()> {
    if test_scores.ncols() != scores.n_classes() {
        return Err(Error::LengthMismatch { expected: scores.n_classes(), got: test_scores.ncols() });
    }
    if test_scores.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test scores)"));
    }
    Ok(())
}

fn solve_system(system: &MatchSystem) -> Result<Estimate> {
    let solution = solve_simplex_least_squares(system)?;
    Ok(Estimate::new(solution.estimate, Flags { fallback: solution.degenerate, ..Flags::default() }))
}

/// Misclassification-rate system: columns `P(prediction | class)`, target
/// the test prediction distribution.
pub fn gac_system(scores: &FittedScores, test_scores: &Array2<f64>) -> Result<MatchSystem> {
    check_test(scores, test_scores)?;
    let rates = confusion_rates(scores)?;
    MatchSystem::from_columns(&rates.columns(), cc(test_scores)?.into_vec())
}

pub fn gac(scores: &FittedScores, test_scores: &Array2<f64>) -> Result<Estimate> {
    solve_system(&gac_system(scores, test_scores)?)
}

/// Like GAC with mean scores in place of prediction rates.
pub fn gpac(scores: &FittedScores, test_scores: &Array2<f64>) -> Result<Estimate> {
    check_test(scores, test_scores)?;
    let means = class_conditional_mean_scores(scores)?;
    let l = means.len();
    let columns: Vec<Vec<f64>> = (0..l).map(|j| (0..l).map(|i| means[i][j]).collect()).collect();
    solve_system(&MatchSystem::from_columns(&columns, mean_rows(test_scores).to_vec())?)
}

fn squared_hellinger(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).powi(2)).sum()
}

/// Minimum Hellinger distance on the GAC system, started from the
/// least-squares solution.
pub fn hdy(scores: &FittedScores, test_scores: &Array2<f64>) -> Result<Estimate> {
    let system = gac_system(scores, test_scores)?;
    let start = solve_simplex_least_squares(&system)?.estimate.into_vec();
    let objective = |theta: &[f64]| squared_hellinger(&system.mix(theta), system.target());
    let estimate = minimize_on_simplex(objective, system.classes(), Some(start), 1e-15, 500)?;
    Ok(Estimate::new(estimate, Flags::default()))
}

/// Matches per-class rates of "score above the training prevalence".
pub fn fm(scores: &FittedScores, test_scores: &Array2<f64>) -> Result<Estimate> {
    check_test(scores, test_scores)?;
    let l = scores.n_classes();
    let prior = scores.train_prevalence();
    if let Some(c) = prior.iter().position(|&p| p == 0.0) {
        return Err(Error::MissingClass(c));
    }
    let indicators = |row: ndarray::ArrayView1<f64>| -> Vec<f64> {
        (0..l).map(|i| if row[i] > prior[i] { 1.0 } else { 0.0 }).collect()
    };
    let mut columns = vec![vec![0.0; l]; l];
    let mut counts = vec![0.0; l];
    for (row, &y) in scores.oof_scores().rows().into_iter().zip(scores.oof_labels()) {
        for (acc, b) in columns[y].iter_mut().zip(indicators(row)) {
            *acc += b;
        }
        counts[y] += 1.0;
    }
    for (col, n) in columns.iter_mut().zip(&counts) {
        col.iter_mut().for_each(|v| *v /= n);
    }
    let mut target = vec![0.0; l];
    for row in test_scores.rows() {
        for (acc, b) in target.iter_mut().zip(indicators(row)) {
            *acc += b;
        }
    }
    let m = test_scores.nrows() as f64;
    target.iter_mut().for_each(|v| *v /= m);
    solve_system(&MatchSystem::from_columns(&columns, target)?)
}

fn categorical_cardinalities(schema: &[ColumnKind]) -> Result<Vec<usize>> {
    schema
        .iter()
        .enumerate()
        .map(|(c, kind)| match kind {
            ColumnKind::Categorical { cardinality } => Ok(*cardinality),
            ColumnKind::Continuous => Err(Error::Unsupported {
                method: "binned-feature quantifier",
                detail: format!("feature {c} is not binned"),
            }),
        })
        .collect()
}

fn check_binned_test(train: &Dataset, test: &Array2<f64>, cards: &[usize]) -> Result<()> {
    if test.ncols() != train.n_features() {
        return Err(Error::SchemaMismatch("train and test feature widths differ".into()));
    }
    if test.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test features)"));
    }
    for (c, &card) in cards.iter().enumerate() {
        if test.column(c).iter().any(|&v| v < 0.0 || v.fract() != 0.0 || v as usize >= card) {
            return Err(Error::SchemaMismatch(format!("test feature {c} holds codes outside 0..{card}")));
        }
    }
    Ok(())
}

/// Sum over features of the Hellinger distance between the mixed
/// per-class feature histograms and the test histogram.
pub fn hdx(train_binned: &Dataset, test_binned: &Array2<f64>) -> Result<Estimate> {
    let cards = categorical_cardinalities(train_binned.schema())?;
    check_binned_test(train_binned, test_binned, &cards)?;
    train_binned.require_all_classes()?;
    let l = train_binned.n_classes();
    let class_counts = train_binned.class_counts();
    // Per feature: per-class histograms and the test histogram.
    let mut features = Vec::with_capacity(cards.len());
    for (f, &card) in cards.iter().enumerate() {
        let mut per_class = vec![vec![0.0; card]; l];
        for (&v, &y) in train_binned.features().column(f).iter().zip(train_binned.labels()) {
            per_class[y][v as usize] += 1.0 / class_counts[y] as f64;
        }
        let mut test = vec![0.0; card];
        let m = test_binned.nrows() as f64;
        for &v in test_binned.column(f) {
            test[v as usize] += 1.0 / m;
        }
        features.push((per_class, test));
    }
    let objective = |theta: &[f64]| -> f64 {
        features
            .iter()
            .map(|(per_class, test)| {
                let mix: Vec<f64> =
                    (0..test.len()).map(|b| per_class.iter().zip(theta).map(|(h, t)| t * h[b]).sum()).collect();
                hellinger(&mix, test).unwrap_or(f64::INFINITY)
            })
            .sum()
    };
    let estimate = minimize_on_simplex(objective, l, None, 1e-15, 500)?;
    Ok(Estimate::new(estimate, Flags::default()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadmeParams {
    pub subsets: usize,
    /// Features per subset; `floor(log2 D) + 1` when unset.
    pub subset_size: Option<usize>,
    /// Subsets with more joint cells than this are redrawn.
    pub cell_cap: usize,
    pub seed: u64,
}

impl Default for ReadmeParams {
    fn default() -> Self {
        Self { subsets: 50, subset_size: None, cell_cap: 4096, seed: 0 }
    }
}

/// `floor(log2 d) + 1`.
pub fn default_subset_size(d: usize) -> usize {
    (usize::BITS - d.max(1).leading_zeros()) as usize
}

/// Draws the feature subsets up front so results do not depend on
/// evaluation order.
pub fn readme_subsets(cards: &[usize], params: &ReadmeParams) -> Result<Vec<Vec<usize>>> {
    let d = cards.len();
    let size = params.subset_size.unwrap_or_else(|| default_subset_size(d));
    if size == 0 || size > d {
        return Err(Error::InvalidArgument(format!("subset size {size} must lie in 1..={d}")));
    }
    if params.subsets == 0 {
        return Err(Error::InvalidArgument("readme needs at least one subset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut subsets = Vec::with_capacity(params.subsets);
    const MAX_ATTEMPTS: usize = 1000;
    while subsets.len() < params.subsets {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let mut subset = sample(&mut rng, d, size).into_vec();
            subset.sort_unstable();
            let cells = subset.iter().try_fold(1usize, |acc, &f| acc.checked_mul(cards[f].max(1)));
            if cells.is_some_and(|c| c <= params.cell_cap) {
                accepted = Some(subset);
                break;
            }
        }
        subsets.push(accepted.ok_or_else(|| {
            Error::Infeasible(format!("no feature subset of size {size} fits within {} cells", params.cell_cap))
        })?);
    }
    Ok(subsets)
}

/// Averages unconstrained least-squares solutions over random feature
/// subsets (joint-cell histograms), then projects onto the simplex.
pub fn readme(train_binned: &Dataset, test_binned: &Array2<f64>, params: &ReadmeParams) -> Result<Estimate> {
    let cards = categorical_cardinalities(train_binned.schema())?;
    check_binned_test(train_binned, test_binned, &cards)?;
    train_binned.require_all_classes()?;
    let l = train_binned.n_classes();
    let class_counts = train_binned.class_counts();
    let subsets = readme_subsets(&cards, params)?;
    let mut sum = vec![0.0; l];
    let cell_of = |row: ndarray::ArrayView1<f64>, subset: &[usize]| -> usize {
        subset.iter().fold(0, |acc, &f| acc * cards[f].max(1) + row[f] as usize)
    };
    for subset in &subsets {
        let cells: usize = subset.iter().map(|&f| cards[f].max(1)).product();
        let mut columns = vec![vec![0.0; cells]; l];
        for (row, &y) in train_binned.features().rows().into_iter().zip(train_binned.labels()) {
            columns[y][cell_of(row, subset)] += 1.0 / class_counts[y] as f64;
        }
        let mut target = vec![0.0; cells];
        let m = test_binned.nrows() as f64;
        for row in test_binned.rows() {
            target[cell_of(row, subset)] += 1.0 / m;
        }
        let theta = least_squares(&MatchSystem::from_columns(&columns, target)?)?;
        sum.iter_mut().zip(&theta).for_each(|(s, t)| *s += t);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / subsets.len() as f64).collect();
    let projected = project_to_simplex(&mean)?;
    let moved = mean.iter().zip(projected.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() > 1e-9;
    Ok(Estimate::new(projected, Flags { clipped: moved, ..Flags::default() }))
}

fn euclidean(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum energy distance between the test sample and a mixture of the
/// class-conditional training samples.
///
/// With `M[j][k]` the mean distance between classes `j` and `k` and `b[j]`
/// the mean distance from the test sample to class `j`, the energy distance
/// to the mixture is `2 b.theta - theta.M.theta` plus a constant. Means
/// include self-pairs, so duplicating the training set changes nothing.
pub fn energy_distance_quantify(train: &Dataset, test_features: &Array2<f64>) -> Result<Estimate> {
    if test_features.ncols() != train.n_features() {
        return Err(Error::SchemaMismatch("train and test feature widths differ".into()));
    }
    if test_features.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test features)"));
    }
    train.require_all_classes()?;
    let l = train.n_classes();
    let x = train.features();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); l];
    for (i, &y) in train.labels().iter().enumerate() {
        members[y].push(i);
    }
    let mut m = vec![vec![0.0; l]; l];
    for j in 0..l {
        for k in j..l {
            let mut total = 0.0;
            for &a in &members[j] {
                for &b in &members[k] {
                    total += euclidean(x.row(a), x.row(b));
                }
            }
            let mean = total / (members[j].len() * members[k].len()) as f64;
            m[j][k] = mean;
            m[k][j] = mean;
        }
    }
    let mut b = vec![0.0; l];
    for (j, class) in members.iter().enumerate() {
        let mut total = 0.0;
        for t in test_features.rows() {
            for &a in class {
                total += euclidean(t, x.row(a));
            }
        }
        b[j] = total / (class.len() * test_features.nrows()) as f64;
    }
    // 1/2 theta'Q theta - c'theta with Q = -2M, c = -2b.
    let q: Vec<Vec<f64>> = m.iter().map(|row| row.iter().map(|v| -2.0 * v).collect()).collect();
    let c: Vec<f64> = b.iter().map(|v| -2.0 * v).collect();
    let solution = minimize_simplex_quadratic(&q, &c)?;
    Ok(Estimate::new(solution.estimate, Flags { fallback: solution.degenerate, ..Flags::default() }))
}

/// State of an iterative estimator when it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct IterState {
    pub estimate: Prevalence,
    pub iteration: usize,
    pub converged: bool,
}

/// Expectation-maximisation prior adjustment of test posteriors. Stops
/// when an update would move the estimate by less than `epsilon` in L1 and
/// returns the iterate before that update. Classes with zero training
/// prevalence stay at zero.
pub fn em_quantify(
    train_prevalence: &[f64],
    test_scores: &Array2<f64>,
    epsilon: f64,
    max_iterations: usize,
) -> Result<IterState> {
    let l = train_prevalence.len();
    if test_scores.ncols() != l {
        return Err(Error::LengthMismatch { expected: l, got: test_scores.ncols() });
    }
    if test_scores.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test scores)"));
    }
    let prior = Prevalence::new(train_prevalence.to_vec())?.into_vec();
    let mut theta = prior.clone();
    let n = test_scores.nrows() as f64;
    let mut posterior = vec![0.0; l];
    for iteration in 0..max_iterations {
        let mut next = vec![0.0; l];
        for row in test_scores.rows() {
            let mut total = 0.0;
            for j in 0..l {
                posterior[j] = if prior[j] > 0.0 { theta[j] / prior[j] * row[j] } else { 0.0 };
                total += posterior[j];
            }
            for j in 0..l {
                next[j] += if total > 0.0 { posterior[j] / total } else { theta[j] };
            }
        }
        next.iter_mut().for_each(|v| *v /= n);
        let step: f64 = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).sum();
        if step < epsilon {
            return Ok(IterState { estimate: Prevalence::new(theta)?, iteration, converged: true });
        }
        theta = next;
    }
    Ok(IterState { estimate: Prevalence::new(theta)?, iteration: max_iterations, converged: false })
}

/// Iterates the Bayes threshold under the current prevalence estimate,
/// re-estimating the positive prevalence by an adjusted count at that
/// threshold (binary, class 0 positive).
pub fn cde_iterate(
    scores: &FittedScores,
    test_scores: &Array2<f64>,
    epsilon: f64,
    max_iterations: usize,
) -> Result<(IterState, Flags)> {
    if scores.n_classes() != 2 || test_scores.ncols() != 2 {
        return Err(Error::Unsupported { method: "cde", detail: "binary problems only".into() });
    }
    if test_scores.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test scores)"));
    }
    let p_train = scores.train_prevalence()[0];
    if p_train <= 0.0 || p_train >= 1.0 {
        return Err(Error::MissingClass(if p_train <= 0.0 { 0 } else { 1 }));
    }
    let m = test_scores.nrows() as f64;
    let mut flags = Flags::default();
    let mut p = p_train;
    for iteration in 1..=max_iterations {
        let num = p_train * (1.0 - p);
        let den = num + (1.0 - p_train) * p;
        let threshold = if den > 0.0 { num / den } else { 0.5 };
        let ppos = test_scores.column(0).iter().filter(|&&s| s >= threshold).count() as f64 / m;
        let (tpr, fpr) = rates_at_threshold(scores, 0, threshold)?;
        let next = match ac(ppos, tpr, fpr) {
            Ok(v) => {
                let raw = (ppos - fpr) / (tpr - fpr);
                flags.clipped = !(0.0..=1.0).contains(&raw);
                v
            }
            Err(Error::DegenerateDenominator) => {
                flags.fallback = true;
                clip_to_unit(ppos)?
            }
            Err(e) => return Err(e),
        };
        let step = (next - p).abs();
        p = next;
        if step < epsilon {
            return Ok((IterState { estimate: Prevalence::binary(p), iteration, converged: true }, flags));
        }
    }
    flags.non_converged = true;
    Ok((IterState { estimate: Prevalence::binary(p), iteration: max_iterations, converged: false }, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{oracle_energy_distance, oracle_simplex_grid_minimize};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn hist(pos: &[f64], neg: &[f64], test: &[f64]) -> BinnedScoreHist {
        BinnedScoreHist::new(pos.len(), pos.to_vec(), neg.to_vec(), test.to_vec()).unwrap()
    }

    #[test]
    fn mixture_search_examples() {
        // Ternary search compares function values, so near the flat minimum
        // it resolves the argmin to about the square root of machine epsilon.
        for (d, tol) in [(Distance::Topsoe, 1e-7), (Distance::L1, 1e-12)] {
            let h = hist(&[0.8, 0.2], &[0.2, 0.8], &[0.5, 0.5]);
            assert_abs_diff_eq!(mixture_search_binary(&h, d), 0.5, epsilon = tol);
            let h = hist(&[0.8, 0.2], &[0.2, 0.8], &[0.8, 0.2]);
            assert_abs_diff_eq!(mixture_search_binary(&h, d), 1.0, epsilon = tol);
            let h = hist(&[0.8, 0.2], &[0.2, 0.8], &[0.35, 0.65]);
            assert_abs_diff_eq!(mixture_search_binary(&h, d), 0.25, epsilon = tol);
        }
    }

    #[test]
    fn l1_search_hits_off_grid_kinks() {
        let h =
            hist(&[0.7, 0.2, 0.1], &[0.1, 0.3, 0.6], &[0.1 + 0.6 * 0.12345, 0.3 - 0.1 * 0.12345, 0.6 - 0.5 * 0.12345]);
        assert_abs_diff_eq!(mixture_search_binary(&h, Distance::L1), 0.12345, epsilon = 1e-12);
    }

    #[test]
    fn histogram_binning() {
        assert_eq!(histogram(&[0.0, 0.05, 0.95, 1.0], 10), vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        // Two-decimal values land in their own percent bin.
        let h = histogram(&[0.29, 0.57], 100);
        assert_eq!(h[29], 0.5);
        assert_eq!(h[57], 0.5);
    }

    fn fitted(rows: &[Vec<f64>], labels: &[usize]) -> FittedScores {
        let l = rows[0].len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        FittedScores::from_oof(Array2::from_shape_vec((rows.len(), l), flat).unwrap(), labels.to_vec()).unwrap()
    }

    fn matrix(rows: &[Vec<f64>]) -> Array2<f64> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows.len(), rows[0].len()), flat).unwrap()
    }

    #[test]
    fn gac_perfect_classifier_returns_prediction_distribution() {
        let s = fitted(&[vec![0.9, 0.1], vec![0.8, 0.2], vec![0.3, 0.7], vec![0.1, 0.9]], &[0, 0, 1, 1]);
        let test = matrix(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.3, 0.7], vec![0.4, 0.6]]);
        let e = gac(&s, &test).unwrap();
        assert_abs_diff_eq!(e.prevalence.values(), &[0.25, 0.75][..], epsilon = 1e-9);
    }

    #[test]
    fn gpac_uniform_scores_are_degenerate() {
        let s = fitted(&[vec![0.5, 0.5], vec![0.5, 0.5]], &[0, 1]);
        let e = gpac(&s, &matrix(&[vec![0.5, 0.5]])).unwrap();
        assert!(e.flags.fallback);
        assert_abs_diff_eq!(e.prevalence.values(), &[0.5, 0.5][..], epsilon = 1e-9);
    }

    #[test]
    fn gpac_one_hot_matches_gac() {
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ];
        let s = fitted(&rows, &[0, 1, 1, 2, 2]);
        let test = matrix(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
        let a = gac(&s, &test).unwrap();
        let b = gpac(&s, &test).unwrap();
        assert_abs_diff_eq!(a.prevalence.values(), b.prevalence.values(), epsilon = 1e-9);
    }

    #[test]
    fn hdy_identity_design() {
        let s = fitted(&[vec![0.9, 0.1], vec![0.2, 0.8]], &[0, 1]);
        let test = matrix(&[vec![0.9, 0.1], vec![0.3, 0.7], vec![0.2, 0.8]]);
        let e = hdy(&s, &test).unwrap();
        assert_abs_diff_eq!(e.prevalence.values(), &[1.0 / 3.0, 2.0 / 3.0][..], epsilon = 1e-6);
    }

    #[test]
    fn hdx_single_binary_feature() {
        let x = array![[1.0], [1.0], [0.0], [0.0], [0.0]];
        let train =
            Dataset::new("t", x, vec![0, 0, 1, 1, 1], 2, vec![ColumnKind::Categorical { cardinality: 2 }]).unwrap();
        let test = Array2::from_shape_fn((10, 1), |(i, _)| if i < 3 { 1.0 } else { 0.0 });
        let e = hdx(&train, &test).unwrap();
        assert_abs_diff_eq!(e.prevalence.values(), &[0.3, 0.7][..], epsilon = 1e-6);
        let oracle = oracle_simplex_grid_minimize(|t| hellinger(&[t[0], t[1]], &[0.3, 0.7]).unwrap(), 2, 100).unwrap();
        assert_abs_diff_eq!(oracle[0], 0.3, epsilon = 1e-9);
    }

    #[test]
    fn hdx_rejects_continuous_features() {
        let train = Dataset::new("t", array![[0.5], [1.5]], vec![0, 1], 2, vec![ColumnKind::Continuous]).unwrap();
        assert!(matches!(hdx(&train, &array![[1.0]]), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn hdx_feature_order_invariant() {
        let x = array![[0.0, 2.0], [1.0, 1.0], [2.0, 0.0], [0.0, 0.0], [1.0, 2.0], [2.0, 1.0], [2.0, 2.0]];
        let y = vec![0, 0, 1, 1, 2, 2, 2];
        let schema = vec![ColumnKind::Categorical { cardinality: 3 }; 2];
        let train = Dataset::new("t", x.clone(), y.clone(), 3, schema.clone()).unwrap();
        let swapped = Dataset::new("t", x.select(ndarray::Axis(1), &[1, 0]), y, 3, schema).unwrap();
        let test = array![[0.0, 1.0], [2.0, 2.0], [1.0, 0.0]];
        let a = hdx(&train, &test).unwrap();
        let b = hdx(&swapped, &test.select(ndarray::Axis(1), &[1, 0])).unwrap();
        assert_abs_diff_eq!(a.prevalence.values(), b.prevalence.values(), epsilon = 1e-12);
    }

    #[test]
    fn subset_size_rule() {
        assert_eq!(default_subset_size(1), 1);
        assert_eq!(default_subset_size(2), 2);
        assert_eq!(default_subset_size(7), 3);
        assert_eq!(default_subset_size(8), 4);
        assert_eq!(default_subset_size(30), 5);
    }

    #[test]
    fn readme_disjoint_support_is_exact_and_deterministic() {
        // Class 0 lives in cell (0,0), class 1 in (1,1): identity-like design.
        let x = array![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let schema = vec![ColumnKind::Categorical { cardinality: 2 }; 2];
        let train = Dataset::new("t", x, vec![0, 0, 1, 1, 1], 2, schema).unwrap();
        let test = array![[0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let params = ReadmeParams { seed: 3, ..ReadmeParams::default() };
        let a = readme(&train, &test, &params).unwrap();
        assert_abs_diff_eq!(a.prevalence.values(), &[0.25, 0.75][..], epsilon = 1e-6);
        assert_eq!(a, readme(&train, &test, &params).unwrap());
    }

    #[test]
    fn readme_redraws_oversized_subsets() {
        let cards = vec![100, 100, 3, 3, 3];
        let params = ReadmeParams { subset_size: Some(2), cell_cap: 50, ..ReadmeParams::default() };
        for s in readme_subsets(&cards, &params).unwrap() {
            assert!(s.iter().all(|&f| f >= 2));
        }
        let params = ReadmeParams { subset_size: Some(2), cell_cap: 5, ..ReadmeParams::default() };
        assert!(matches!(readme_subsets(&cards, &params), Err(Error::Infeasible(_))));
    }

    fn two_blobs() -> Dataset {
        let x = array![[0.0, 0.0], [0.5, 0.2], [0.1, 0.6], [4.0, 4.0], [4.4, 3.8], [3.7, 4.3]];
        Dataset::new("t", x, vec![0, 0, 0, 1, 1, 1], 2, vec![ColumnKind::Continuous; 2]).unwrap()
    }

    #[test]
    fn energy_distance_examples() {
        let train = two_blobs();
        let class0 = train.features().select(ndarray::Axis(0), &[0, 1, 2]);
        let e = energy_distance_quantify(&train, &class0).unwrap();
        assert_abs_diff_eq!(e.prevalence.values(), &[1.0, 0.0][..], epsilon = 1e-9);

        let whole = train.features().clone();
        let e = energy_distance_quantify(&train, &whole).unwrap();
        assert_abs_diff_eq!(e.prevalence.values(), &[0.5, 0.5][..], epsilon = 1e-3);

        // Grid oracle on the explicit energy distance.
        let rows = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let classes = vec![rows(&class0), rows(&train.features().select(ndarray::Axis(0), &[3, 4, 5]))];
        let test = rows(&train.features().select(ndarray::Axis(0), &[0, 3, 4, 5]));
        let oracle = oracle_simplex_grid_minimize(|t| oracle_energy_distance(&test, &classes, t), 2, 200).unwrap();
        let e = energy_distance_quantify(&train, &matrix(&test)).unwrap();
        assert_abs_diff_eq!(e.prevalence.get(0), oracle[0], epsilon = 5e-3);
    }

    #[test]
    fn energy_distance_duplication_invariant() {
        let train = two_blobs();
        let doubled = train.subset(&[0, 1, 2, 3, 4, 5, 0, 1, 2, 3, 4, 5]).unwrap();
        let test = array![[0.2, 0.1], [4.1, 4.0], [3.9, 3.9]];
        let a = energy_distance_quantify(&train, &test).unwrap();
        let b = energy_distance_quantify(&doubled, &test).unwrap();
        assert_abs_diff_eq!(a.prevalence.values(), b.prevalence.values(), epsilon = 1e-12);
    }

    #[test]
    fn em_fixed_point_and_one_hot() {
        let prior = [0.3, 0.5, 0.2];
        let scores = Array2::from_shape_fn((7, 3), |(_, j)| prior[j]);
        let state = em_quantify(&prior, &scores, 1e-6, 1000).unwrap();
        assert_eq!(state.estimate.values(), &prior);
        assert_eq!(state.iteration, 0);
        assert!(state.converged);

        let one_hot = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let state = em_quantify(&prior, &one_hot, 1e-6, 1000).unwrap();
        assert_eq!(state.iteration, 1);
        assert_eq!(state.estimate, cc(&one_hot).unwrap());
    }

    #[test]
    fn em_respects_iteration_cap() {
        let scores = array![[0.6, 0.4], [0.7, 0.3]];
        let state = em_quantify(&[0.5, 0.5], &scores, 0.0, 3).unwrap();
        assert!(!state.converged);
        assert_eq!(state.iteration, 3);
    }

    #[test]
    fn cde_separable_scores() {
        let s =
            fitted(&[vec![0.9, 0.1], vec![0.8, 0.2], vec![0.2, 0.8], vec![0.1, 0.9], vec![0.3, 0.7]], &[0, 0, 1, 1, 1]);
        let test = matrix(&[vec![0.95, 0.05], vec![0.1, 0.9], vec![0.15, 0.85], vec![0.05, 0.95]]);
        let (state, _) = cde_iterate(&s, &test, 1e-6, 1000).unwrap();
        assert!(state.converged && state.iteration <= 2);
        assert_abs_diff_eq!(state.estimate.get(0), 0.25, epsilon = 1e-12);
        let three = fitted(&[vec![0.5, 0.3, 0.2]], &[0]);
        assert!(cde_iterate(&three, &matrix(&[vec![0.5, 0.3, 0.2]]), 1e-6, 10).is_err());
    }

    proptest! {
        #[test]
        fn exact_binary_mixtures_are_recovered(
            pos in proptest::collection::vec(0.01f64..1.0, 10),
            neg in proptest::collection::vec(0.01f64..1.0, 10),
            alpha in 0.05f64..0.95,
        ) {
            let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
            let (p, n) = (norm(&pos), norm(&neg));
            let test: Vec<f64> = p.iter().zip(&n).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
            let h = BinnedScoreHist::new(10, p, n, test).unwrap();
            prop_assert!((mixture_search_binary(&h, Distance::Topsoe) - alpha).abs() < 1e-6);
            prop_assert!((mixture_search_binary(&h, Distance::L1) - alpha).abs() < 1e-9);
        }

        #[test]
        fn em_stays_on_simplex(rows in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 3), 1..20)) {
            let rows: Vec<Vec<f64>> = rows.iter().map(|r| { let s: f64 = r.iter().sum(); r.iter().map(|x| x / s).collect() }).collect();
            let state = em_quantify(&[0.2, 0.3, 0.5], &matrix(&rows), 1e-6, 1000).unwrap();
            prop_assert!((state.estimate.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
