//! Scenario grids and prevalence-constrained train/test draws.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::l1;
use crate::{Dataset, Error, Result};

/// Fraction of drawn instances assigned to training.
pub const TRAIN_FRACTIONS: [f64; 4] = [0.1, 0.3, 0.5, 0.7];
/// Positive-class prevalences of the binary training sets.
pub const BINARY_TRAIN_POSITIVES: [f64; 6] = [0.05, 0.1, 0.3, 0.5, 0.7, 0.9];
/// Positive-class prevalences of the binary test sets.
pub const BINARY_TEST_POSITIVES: [f64; 12] = [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
/// Ten fixed draw seeds.
pub const DEFAULT_SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

/// Requested train/test class distributions for one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub train_dist: Vec<f64>,
    pub test_dist: Vec<f64>,
    pub train_fraction: f64,
    pub seed: u64,
}

fn check_distribution(dist: &[f64], what: &str) -> Result<()> {
    if dist.len() < 2 {
        return Err(Error::InvalidArgument(format!("{what} needs at least 2 entries")));
    }
    if dist.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::InvalidArgument(format!("{what} has negative or non-finite entries")));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl ScenarioSpec {
    pub fn new(train_dist: Vec<f64>, test_dist: Vec<f64>, train_fraction: f64, seed: u64) -> Result<Self> {
        let spec = Self { train_dist, test_dist, train_fraction, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_distribution(&self.train_dist, "train distribution")?;
        check_distribution(&self.test_dist, "test distribution")?;
        if self.train_dist.len() != self.test_dist.len() {
            return Err(Error::LengthMismatch { expected: self.train_dist.len(), got: self.test_dist.len() });
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!("train fraction {} outside (0, 1)", self.train_fraction)));
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.train_dist.len()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Overall share of drawn instances that class `j` must supply.
    fn demand(&self, j: usize) -> f64 {
        self.train_fraction * self.train_dist[j] + (1.0 - self.train_fraction) * self.test_dist[j]
    }

    pub fn shift_category(&self, mode: ShiftMode) -> ShiftCategory {
        shift_category(&self.train_dist, &self.test_dist, mode)
    }
}

/// Indices and realized distributions of one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawnSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub realized_train_dist: Vec<f64>,
    pub realized_test_dist: Vec<f64>,
}

/// Largest total `n` whose per-class demand fits the available counts.
pub fn max_feasible_total(class_counts: &[usize], spec: &ScenarioSpec) -> Result<usize> {
    spec.validate()?;
    if class_counts.len() != spec.n_classes() {
        return Err(Error::LengthMismatch { expected: spec.n_classes(), got: class_counts.len() });
    }
    let mut best = f64::INFINITY;
    for (j, &count) in class_counts.iter().enumerate() {
        let demand = spec.demand(j);
        if demand <= 0.0 {
            continue;
        }
        if count == 0 {
            return Err(Error::Infeasible(format!("class {j} is requested but has no instances")));
        }
        best = best.min(count as f64 / demand);
    }
    Ok((best + 1e-9).floor() as usize)
}

/// Largest-remainder rounding of `targets` to integers summing to the
/// rounded total; zero targets stay zero.
fn apportion(targets: &[f64]) -> Vec<usize> {
    let total = targets.iter().sum::<f64>();
    let total = (total + 1e-9).round() as usize;
    let mut counts: Vec<usize> = targets.iter().map(|&t| (t + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..targets.len()).filter(|&j| targets[j] > 0.0).collect();
    let remainder = |j: usize| targets[j] - counts[j] as f64;
    order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
    for &j in order.iter().take(total.saturating_sub(assigned)) {
        counts[j] += 1;
    }
    counts
}

/// Per-class train and test counts for a spec.
pub fn split_counts(class_counts: &[usize], spec: &ScenarioSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = max_feasible_total(class_counts, spec)?;
    let l = spec.n_classes();
    if n < l {
        return Err(Error::Infeasible(format!("feasible total {n} is below the class count {l}")));
    }
    let n_train = n as f64 * spec.train_fraction;
    let n_test = n as f64 * (1.0 - spec.train_fraction);
    let train_targets: Vec<f64> = spec.train_dist.iter().map(|&p| n_train * p).collect();
    let test_targets: Vec<f64> = spec.test_dist.iter().map(|&p| n_test * p).collect();
    let mut train = apportion(&train_targets);
    let mut test = apportion(&test_targets);
    for j in 0..l {
        if train[j] + test[j] > class_counts[j] {
            if test[j] as f64 > test_targets[j] {
                test[j] -= 1;
            } else {
                train[j] -= 1;
            }
        }
    }
    if train.iter().sum::<usize>() == 0 || test.iter().sum::<usize>() == 0 {
        return Err(Error::Infeasible("draw leaves the train or test side empty".into()));
    }
    Ok((train, test))
}

fn normalized(counts: &[usize]) -> Vec<f64> {
    let total = counts.iter().sum::<usize>() as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

/// Undersamples `data` to the requested distributions. Each class is
/// shuffled by its own stream of a generator seeded with `spec.seed`; the
/// first instances go to training and the next ones to test.
pub fn draw_split(data: &Dataset, spec: &ScenarioSpec) -> Result<DrawnSplit> {
    if data.n_classes() != spec.n_classes() {
        return Err(Error::LengthMismatch { expected: data.n_classes(), got: spec.n_classes() });
    }
    let (train_counts, test_counts) = split_counts(&data.class_counts(), spec)?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.n_classes()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        let (tr, te) = (train_counts[class], test_counts[class]);
        train_indices.extend_from_slice(&members[..tr]);
        test_indices.extend_from_slice(&members[tr..tr + te]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(DrawnSplit {
        realized_train_dist: normalized(&train_counts),
        realized_test_dist: normalized(&test_counts),
        train_indices,
        test_indices,
        train_counts,
        test_counts,
    })
}

/// Positive-class grid: training prevalence × test prevalence × split.
pub fn binary_grid(seed: u64) -> Vec<ScenarioSpec> {
    let mut specs = Vec::with_capacity(288);
    for &p_train in &BINARY_TRAIN_POSITIVES {
        for &p_test in &BINARY_TEST_POSITIVES {
            for &fraction in &TRAIN_FRACTIONS {
                specs.push(ScenarioSpec {
                    train_dist: vec![p_train, 1.0 - p_train],
                    test_dist: vec![p_test, 1.0 - p_test],
                    train_fraction: fraction,
                    seed,
                });
            }
        }
    }
    specs
}

type DistTable = (&'static [&'static [f64]], &'static [&'static [f64]]);

fn multiclass_table(classes: usize) -> Option<DistTable> {
    const TRAIN3: &[&[f64]] = &[&[0.2, 0.5, 0.3], &[0.05, 0.8, 0.15], &[0.35, 0.3, 0.35]];
    const TEST3: &[&[f64]] =
        &[&[0.1, 0.7, 0.2], &[0.55, 0.1, 0.35], &[0.35, 0.55, 0.1], &[0.4, 0.25, 0.35], &[0.0, 0.05, 0.95]];
    // The second row sums to 1.1 as published; it is renormalised on use.
    const TRAIN4: &[&[f64]] = &[&[0.5, 0.3, 0.1, 0.1], &[0.7, 0.2, 0.1, 0.1], &[0.25, 0.25, 0.25, 0.25]];
    const TEST4: &[&[f64]] = &[
        &[0.65, 0.25, 0.05, 0.05],
        &[0.2, 0.25, 0.3, 0.25],
        &[0.45, 0.15, 0.2, 0.2],
        &[0.2, 0.0, 0.0, 0.8],
        &[0.3, 0.25, 0.35, 0.1],
    ];
    const TRAIN5: &[&[f64]] = &[&[0.05, 0.2, 0.1, 0.2, 0.45], &[0.05, 0.1, 0.7, 0.1, 0.05], &[0.2, 0.2, 0.2, 0.2, 0.2]];
    const TEST5: &[&[f64]] = &[
        &[0.15, 0.1, 0.65, 0.1, 0.0],
        &[0.45, 0.1, 0.3, 0.05, 0.1],
        &[0.2, 0.25, 0.25, 0.1, 0.2],
        &[0.35, 0.05, 0.05, 0.05, 0.5],
        &[0.05, 0.25, 0.15, 0.15, 0.4],
    ];
    match classes {
        3 => Some((TRAIN3, TEST3)),
        4 => Some((TRAIN4, TEST4)),
        5 => Some((TRAIN5, TEST5)),
        _ => None,
    }
}

fn renormalized(dist: &[f64]) -> Vec<f64> {
    let sum: f64 = dist.iter().sum();
    dist.iter().map(|v| v / sum).collect()
}

/// Multiclass grid for `classes` ∈ {3, 4, 5}: 3 train × 5 test
/// distributions × 4 splits.
pub fn multiclass_grid(classes: usize, seed: u64) -> Result<Vec<ScenarioSpec>> {
    let (train, test) = multiclass_table(classes).ok_or_else(|| {
        Error::InvalidArgument(format!("no multiclass grid for {classes} classes (supported: 3, 4, 5)"))
    })?;
    let mut specs = Vec::with_capacity(60);
    for tr in train {
        for te in test {
            for &fraction in &TRAIN_FRACTIONS {
                specs.push(ScenarioSpec {
                    train_dist: renormalized(tr),
                    test_dist: renormalized(te),
                    train_fraction: fraction,
                    seed,
                });
            }
        }
    }
    Ok(specs)
}

/// How far the test distribution moved from the training distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftCategory {
    Minor,
    Medium,
    Major,
}

impl ShiftCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftCategory::Minor => "minor",
            ShiftCategory::Medium => "medium",
            ShiftCategory::Major => "major",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "minor" => Some(ShiftCategory::Minor),
            "medium" => Some(ShiftCategory::Medium),
            "major" => Some(ShiftCategory::Major),
            _ => None,
        }
    }
}

impl std::fmt::Display for ShiftCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftMode {
    Binary,
    Multiclass,
}

/// Buckets the L1 distance between two distributions. Binary: minor below
/// 0.4, medium below 0.8, major otherwise. Multiclass: minor below 0.5,
/// major otherwise.
pub fn shift_category(train_dist: &[f64], test_dist: &[f64], mode: ShiftMode) -> ShiftCategory {
    let distance = l1(train_dist, test_dist).unwrap_or(f64::INFINITY);
    let distance = (distance * 1e9).round() / 1e9;
    match mode {
        ShiftMode::Binary if distance < 0.4 => ShiftCategory::Minor,
        ShiftMode::Binary if distance < 0.8 => ShiftCategory::Medium,
        ShiftMode::Multiclass if distance < 0.5 => ShiftCategory::Minor,
        _ => ShiftCategory::Major,
    }
}
