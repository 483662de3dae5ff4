//! Probabilistic classify-and-count and the weighted nearest-neighbour
//! quantifier.

use ndarray::Array2;

use crate::{Error, Prevalence, Result};

/// Mean of the test score rows.
pub fn pcc(test_scores: &Array2<f64>) -> Result<Prevalence> {
    if test_scores.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test scores)"));
    }
    let n = test_scores.nrows() as f64;
    let means: Vec<f64> = test_scores.columns().into_iter().map(|c| c.sum() / n).collect();
    let total: f64 = means.iter().sum();
    Prevalence::new(means.iter().map(|m| m / total).collect())
}

/// Vote weight of each class: `(n_min / n_c)^(1 / alpha)`, zero for classes
/// absent from training.
pub fn pwk_weights(class_counts: &[usize], alpha: f64) -> Vec<f64> {
    let n_min = class_counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(1) as f64;
    class_counts.iter().map(|&c| if c == 0 { 0.0 } else { (n_min / c as f64).powf(1.0 / alpha) }).collect()
}

/// Class-weighted k-nearest-neighbour classify-and-count. Distance ties at
/// the k-th neighbour keep the lower training index; vote ties go to the
/// lower class.
pub fn pwk(
    train_features: &Array2<f64>,
    train_labels: &[usize],
    n_classes: usize,
    test_features: &Array2<f64>,
    k: usize,
    alpha: f64,
) -> Result<Prevalence> {
    let n = train_features.nrows();
    if train_labels.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: train_labels.len() });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={n}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if test_features.ncols() != train_features.ncols() {
        return Err(Error::SchemaMismatch("train and test feature widths differ".into()));
    }
    if test_features.nrows() == 0 {
        return Err(Error::EmptyDataset(" (test features)"));
    }
    let mut counts = vec![0; n_classes];
    for &y in train_labels {
        *counts.get_mut(y).ok_or_else(|| Error::InvalidArgument(format!("label {y} outside 0..{n_classes}")))? += 1;
    }
    weighted_knn_counts(train_features, train_labels, test_features, k, &pwk_weights(&counts, alpha))
}

fn weighted_knn_counts(
    train_features: &Array2<f64>,
    train_labels: &[usize],
    test_features: &Array2<f64>,
    k: usize,
    weights: &[f64],
) -> Result<Prevalence> {
    let n = train_features.nrows();
    let n_classes = weights.len();
    let mut predictions = vec![0; n_classes];
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for point in test_features.rows() {
        order.clear();
        for (i, row) in train_features.rows().into_iter().enumerate() {
            let d: f64 = row.iter().zip(point.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            order.push((d, i));
        }
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            order.select_nth_unstable_by(k - 1, by_distance);
        }
        let mut votes = vec![0.0; n_classes];
        for &(_, i) in &order[..k] {
            votes[train_labels[i]] += weights[train_labels[i]];
        }
        let mut best = 0;
        for c in 1..n_classes {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        predictions[best] += 1;
    }
    Prevalence::from_counts(&predictions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn pcc_examples() {
        assert_eq!(pcc(&array![[0.8, 0.2], [0.2, 0.8]]).unwrap().values(), &[0.5, 0.5]);
        let one_hot = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(pcc(&one_hot).unwrap(), crate::quantify::count::cc(&one_hot).unwrap());
    }

    #[test]
    fn balanced_weights_are_uniform() {
        assert_eq!(pwk_weights(&[5, 5, 5], 1.0), vec![1.0; 3]);
        let w = pwk_weights(&[90, 10], 1.0);
        assert_abs_diff_eq!(w[0], 1.0 / 9.0, epsilon = 1e-15);
        assert_eq!(w[1], 1.0);
    }

    fn line(xs: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap()
    }

    #[test]
    fn one_neighbour_copies_its_class() {
        let train = line(&[0.0, 1.0, 2.0, 10.0]);
        let labels = [0, 0, 0, 1];
        let test = line(&[9.0, 0.5]);
        let p = pwk(&train, &labels, 2, &test, 1, 1.0).unwrap();
        assert_eq!(p.values(), &[0.5, 0.5]);
    }

    #[test]
    fn weighting_favours_the_minority() {
        // 90 majority points spread on [0, 9), 10 minority points on [8, 10).
        let mut xs: Vec<f64> = (0..90).map(|i| i as f64 * 0.1).collect();
        xs.extend((0..10).map(|i| 8.0 + i as f64 * 0.2));
        let mut labels = vec![0; 90];
        labels.extend(vec![1; 10]);
        let train = line(&xs);
        let test = line(&[8.3, 8.6, 8.9, 9.2, 2.0]);
        let n = xs.len();
        let weighted = pwk(&train, &labels, 2, &test, 10, 1.0).unwrap();
        let plain = weighted_knn_counts(&train, &labels, &test, 10, &[1.0, 1.0]).unwrap();
        assert!(weighted.get(1) > plain.get(1), "{weighted:?} vs {plain:?}");
        assert!(pwk(&train, &labels, 2, &test, n + 1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn relabelling_permutes_output(xs in proptest::collection::vec(-5.0f64..5.0, 12), ts in proptest::collection::vec(-5.0f64..5.0, 6), half in 0usize..3) {
            // Balanced classes and odd k: no vote ties.
            let k = 2 * half + 1;
            let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
            let swapped: Vec<usize> = labels.iter().map(|&y| 1 - y).collect();
            let a = pwk(&line(&xs), &labels, 2, &line(&ts), k, 1.0).unwrap();
            let b = pwk(&line(&xs), &swapped, 2, &line(&ts), k, 1.0).unwrap();
            prop_assert!((a.get(0) - b.get(1)).abs() < 1e-12);
        }

        #[test]
        fn weights_scale_invariant(counts in proptest::collection::vec(1usize..100, 2..5), scale in 2usize..10) {
            let a = pwk_weights(&counts, 1.0);
            let scaled: Vec<usize> = counts.iter().map(|c| c * scale).collect();
            let b = pwk_weights(&scaled, 1.0);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!(*x > 0.0);
            }
        }
    }
}
