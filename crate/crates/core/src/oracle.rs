//! Brute-force reference implementations.
//!
//! Deliberately naive (exhaustive or closed-form) and never called by the
//! quantifiers themselves. Tests and the fixture generator use them to
//! produce expected values independently of the production code paths.

use crate::{Error, Result};

/// Largest class count the lattice oracle accepts.
pub const MAX_LATTICE_CLASSES: usize = 4;
/// Largest lattice resolution the oracle accepts.
pub const MAX_LATTICE_RESOLUTION: usize = 200;

/// Exhaustive minimisation over the simplex lattice `{k / resolution}`.
///
/// Points are enumerated with the first coordinate varying slowest, starting
/// at `(0, .., 0, 1)`; ties keep the earliest point, so a constant objective
/// returns the vertex of the last class.
pub fn oracle_simplex_grid_minimize(
    objective: impl Fn(&[f64]) -> f64,
    classes: usize,
    resolution: usize,
) -> Result<Vec<f64>> {
    if classes == 0 || classes > MAX_LATTICE_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "lattice oracle supports 1..={MAX_LATTICE_CLASSES} classes, got {classes}"
        )));
    }
    if resolution == 0 || resolution > MAX_LATTICE_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "lattice resolution must be in 1..={MAX_LATTICE_RESOLUTION}, got {resolution}"
        )));
    }
    let mut counts = vec![0usize; classes];
    let mut point = vec![0.0; classes];
    let mut best: Option<(f64, Vec<f64>)> = None;
    enumerate(&mut counts, 0, resolution, &mut |c| {
        for (p, &k) in point.iter_mut().zip(c) {
            *p = k as f64 / resolution as f64;
        }
        let v = objective(&point);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, point.clone()));
        }
    });
    Ok(best.expect("lattice is nonempty").1)
}

fn enumerate(counts: &mut [usize], pos: usize, remaining: usize, visit: &mut impl FnMut(&[usize])) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[pos] = k;
        enumerate(counts, pos + 1, remaining - k, visit);
    }
}

/// Expected classify-and-count output `p * tpr + (1 - p) * fpr`.
pub fn oracle_cc_expectation(p: f64, tpr: f64, fpr: f64) -> f64 {
    p * tpr + (1.0 - p) * fpr
}

/// Energy distance (V-statistic form) between the empirical test sample and
/// the `theta`-weighted mixture of per-class samples, computed pairwise from
/// scratch.
pub fn oracle_energy_distance(test: &[Vec<f64>], classes: &[Vec<Vec<f64>>], theta: &[f64]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mean_between = |xs: &[Vec<f64>], ys: &[Vec<f64>]| {
        let mut s = 0.0;
        for x in xs {
            for y in ys {
                s += dist(x, y);
            }
        }
        s / (xs.len() * ys.len()) as f64
    };
    let mut cross = 0.0;
    let mut within_mix = 0.0;
    for (j, cj) in classes.iter().enumerate() {
        cross += theta[j] * mean_between(test, cj);
        for (k, ck) in classes.iter().enumerate() {
            within_mix += theta[j] * theta[k] * mean_between(cj, ck);
        }
    }
    2.0 * cross - within_mix - mean_between(test, test)
}

/// Training-set accuracy of a 1-nearest-neighbour classifier, with the query
/// point itself excluded.
pub fn oracle_one_nn_accuracy(features: &[Vec<f64>], labels: &[usize]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut correct = 0;
    for i in 0..features.len() {
        let nearest = (0..features.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| dist(&features[i], &features[a]).total_cmp(&dist(&features[i], &features[b])))
            .expect("at least two points");
        if labels[nearest] == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / features.len() as f64
}
