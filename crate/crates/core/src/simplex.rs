//! Points on the probability simplex and the small utilities that put
//! quantifier outputs there.

use crate::{Error, Result, Scalar};

/// Tolerance on `sum == 1` accepted by [`PrevalenceEstimate::new`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A class distribution: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PrevalenceEstimate<T> {
    values: Vec<T>,
}

impl<T: Scalar> PrevalenceEstimate<T> {
    /// Validates and renormalises `values`. Entries within `1e-12` below zero
    /// are treated as rounding noise and set to zero.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty prevalence vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prevalence vector"));
        }
        let noise = T::of(-1e-12);
        if values.iter().any(|&v| v < noise) {
            return Err(Error::InvalidArgument(format!("negative prevalence in {values:?}")));
        }
        let values: Vec<T> = values.into_iter().map(|v| v.max(T::zero())).collect();
        let sum: T = values.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(SUM_TOLERANCE) {
            return Err(Error::InvalidArgument(format!("prevalence sums to {sum}, not 1")));
        }
        Ok(Self::renormalized(values))
    }

    /// Uniform distribution over `n_classes` classes.
    pub fn uniform(n_classes: usize) -> Self {
        let v = T::one() / T::of(n_classes as f64);
        Self { values: vec![v; n_classes] }
    }

    /// Point mass on `class`.
    pub fn vertex(n_classes: usize, class: usize) -> Self {
        let mut values = vec![T::zero(); n_classes];
        values[class] = T::one();
        Self { values }
    }

    /// Binary distribution `(positive, 1 - positive)`; the positive class is index 0.
    pub fn binary(positive: T) -> Self {
        let p = clip_unit_unchecked(positive);
        Self { values: vec![p, T::one() - p] }
    }

    /// Empirical distribution of class indices.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidArgument("all counts are zero".into()));
        }
        let t = T::of(total as f64);
        Ok(Self { values: counts.iter().map(|&c| T::of(c as f64) / t).collect() })
    }

    fn renormalized(values: Vec<T>) -> Self {
        let sum: T = values.iter().copied().sum();
        if sum == T::one() {
            return Self { values };
        }
        Self { values: values.into_iter().map(|v| v / sum).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, class: usize) -> T {
        self.values[class]
    }
}

impl<T> AsRef<[T]> for PrevalenceEstimate<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

fn clip_unit_unchecked<T: Scalar>(raw: T) -> T {
    raw.max(T::zero()).min(T::one())
}

/// Clamps a raw binary prevalence into `[0, 1]`.
pub fn clip_to_unit<T: Scalar>(raw: T) -> Result<T> {
    if raw.is_nan() {
        return Err(Error::NonFinite("clip_to_unit input"));
    }
    Ok(clip_unit_unchecked(raw))
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_to_simplex<T: Scalar>(raw: &[T]) -> Result<PrevalenceEstimate<T>> {
    if raw.is_empty() {
        return Err(Error::InvalidArgument("empty vector".into()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("simplex projection input"));
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumulative = T::zero();
    let mut tau = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumulative = cumulative + u;
        let candidate = (cumulative - T::one()) / T::of((j + 1) as f64);
        if u - candidate > T::zero() {
            tau = candidate;
        }
    }
    let values = raw.iter().map(|&v| (v - tau).max(T::zero())).collect();
    Ok(PrevalenceEstimate::renormalized(values))
}

/// Normalises one-vs-rest positive prevalences into a distribution.
/// All-zero input yields the uniform distribution.
pub fn ovr_combine<T: Scalar>(per_class: &[T]) -> Result<PrevalenceEstimate<T>> {
    if per_class.is_empty() {
        return Err(Error::InvalidArgument("no per-class estimates".into()));
    }
    if per_class.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::InvalidArgument(format!("per-class estimates must be in [0,1]: {per_class:?}")));
    }
    let sum: T = per_class.iter().copied().sum();
    if sum <= T::zero() {
        return Ok(PrevalenceEstimate::uniform(per_class.len()));
    }
    Ok(PrevalenceEstimate { values: per_class.iter().map(|&v| v / sum).collect() })
}
