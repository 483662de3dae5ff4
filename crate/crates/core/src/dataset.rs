//! Labelled datasets: CSV loading, preprocessing plans, binning and
//! synthetic Gaussian generators.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Kind of a feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    /// Integer codes in `0..cardinality`.
    Categorical {
        cardinality: usize,
    },
}

/// Feature matrix, class labels and column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    schema: Vec<ColumnKind>,
    column_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Validates shapes, label range and categorical codes. Classes may be
    /// absent from `labels` (subsamples); see [`Dataset::require_all_classes`].
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        schema: Vec<ColumnKind>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::EmptyDataset(""));
        }
        if d == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if n_classes < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 classes, got {n_classes}")));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::InvalidDataset(format!("label {bad} outside 0..{n_classes}")));
        }
        if schema.len() != d {
            return Err(Error::SchemaMismatch(format!("{} schema entries for {d} columns", schema.len())));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        for (c, kind) in schema.iter().enumerate() {
            if let ColumnKind::Categorical { cardinality } = *kind {
                let ok = features.column(c).iter().all(|&v| v >= 0.0 && v.fract() == 0.0 && (v as usize) < cardinality);
                if !ok {
                    return Err(Error::SchemaMismatch(format!(
                        "categorical column {c} holds values outside 0..{cardinality}"
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            n_classes,
            schema,
            column_names: (0..d).map(|c| format!("x{c}")).collect(),
            class_names: (0..n_classes).map(|c| c.to_string()).collect(),
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::LengthMismatch { expected: self.n_features(), got: names.len() });
        }
        self.column_names = names;
        Ok(self)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(Error::LengthMismatch { expected: self.n_classes, got: names.len() });
        }
        self.class_names = names;
        Ok(self)
    }

    /// Errors unless every class index occurs at least once.
    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(c) => Err(Error::MissingClass(c)),
            None => Ok(()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn schema(&self) -> &[ColumnKind] {
        &self.schema
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Empirical class distribution.
    pub fn prevalence(&self) -> Vec<f64> {
        let n = self.n_instances() as f64;
        self.class_counts().into_iter().map(|c| c as f64 / n).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset(" (empty subset)"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_instances()) {
            return Err(Error::InvalidArgument(format!("row index {bad} out of range")));
        }
        Ok(Self {
            name: self.name.clone(),
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            schema: self.schema.clone(),
            column_names: self.column_names.clone(),
            class_names: self.class_names.clone(),
        })
    }

    /// One-vs-rest relabelling: `class` becomes 0 (positive), every other class 1.
    pub fn one_vs_rest(&self, class: usize) -> Result<Self> {
        if class >= self.n_classes {
            return Err(Error::InvalidArgument(format!("class {class} outside 0..{}", self.n_classes)));
        }
        let labels = self.labels.iter().map(|&y| usize::from(y != class)).collect();
        let mut out = Self::new(self.name.clone(), self.features.clone(), labels, 2, self.schema.clone())?;
        out.column_names = self.column_names.clone();
        out.class_names = vec![self.class_names[class].clone(), "rest".into()];
        Ok(out)
    }

    /// Same features with replaced labels and class count.
    pub fn relabeled(&self, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let mut out = Self::new(self.name.clone(), self.features.clone(), labels, n_classes, self.schema.clone())?;
        out.column_names = self.column_names.clone();
        Ok(out)
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "?"
}

/// Loads a headed, comma-separated file. Rows with an empty (or `?`) cell are
/// dropped. Labels and categorical values are coded densely in order of
/// first appearance.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, categorical_columns: &[&str]) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let target = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTargetColumn(target_column.to_owned()))?;
    for c in categorical_columns {
        if !headers.iter().any(|h| h == c) {
            return Err(Error::SchemaMismatch(format!("categorical column `{c}` not in header")));
        }
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != target).collect();
    if feature_cols.is_empty() {
        return Err(Error::InvalidDataset("no feature columns besides the target".into()));
    }
    let is_cat: Vec<bool> = feature_cols.iter().map(|&c| categorical_columns.contains(&headers[c].as_str())).collect();

    let mut label_codes: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut cat_codes: Vec<HashMap<String, usize>> = vec![HashMap::new(); feature_cols.len()];
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().any(is_missing) || record.len() != headers.len() {
            continue;
        }
        let mut row = Vec::with_capacity(feature_cols.len());
        for (k, &c) in feature_cols.iter().enumerate() {
            let cell = &record[c];
            if is_cat[k] {
                let next = cat_codes[k].len();
                let code = *cat_codes[k].entry(cell.to_owned()).or_insert(next);
                row.push(code as f64);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    column: headers[c].clone(),
                    row: row_idx + 1,
                    value: cell.to_owned(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonNumeric {
                        column: headers[c].clone(),
                        row: row_idx + 1,
                        value: cell.to_owned(),
                    });
                }
                row.push(v);
            }
        }
        let label = &record[target];
        let next = label_codes.len();
        let code = *label_codes.entry(label.to_owned()).or_insert_with(|| {
            class_names.push(label.to_owned());
            next
        });
        values.extend(row);
        labels.push(code);
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset(" after removing rows with missing values"));
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, feature_cols.len()), values).expect("row widths are uniform");
    let schema = is_cat
        .iter()
        .zip(&cat_codes)
        .map(
            |(&cat, codes)| {
                if cat {
                    ColumnKind::Categorical { cardinality: codes.len() }
                } else {
                    ColumnKind::Continuous
                }
            },
        )
        .collect();
    let name = path.file_stem().map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned());
    let n_classes = class_names.len();
    if n_classes < 2 {
        return Err(Error::SingleClass);
    }
    Dataset::new(name, features, labels, n_classes, schema)?
        .with_column_names(feature_cols.iter().map(|&c| headers[c].clone()).collect())?
        .with_class_names(class_names)
}

/// Writes features (categorical columns as their codes) followed by a
/// `target` column holding class names.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>, target_column: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<&str> = data.column_names.iter().map(String::as_str).collect();
    header.push(target_column);
    writer.write_record(&header)?;
    for (row, &y) in data.features.rows().into_iter().zip(&data.labels) {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        record.push(data.class_names[y].clone());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|source| Error::Io { path: path.as_ref().to_owned(), source })?;
    Ok(())
}

/// Per-column transformation fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnPlan {
    /// Constant on the training data.
    Dropped,
    Standardize {
        mean: f64,
        std: f64,
    },
    OneHot {
        cardinality: usize,
    },
    /// Continuous value mapped to the number of interior edges below it.
    Bin {
        edges: Vec<f64>,
    },
    /// Categorical code passed through (binned output).
    Code {
        cardinality: usize,
    },
}

impl ColumnPlan {
    fn width(&self) -> usize {
        match self {
            ColumnPlan::Dropped => 0,
            ColumnPlan::Standardize { .. } | ColumnPlan::Bin { .. } | ColumnPlan::Code { .. } => 1,
            ColumnPlan::OneHot { cardinality } => *cardinality,
        }
    }
}

/// Preprocessing fitted on a training set and applied to any conforming data.
///
/// Without binning: continuous columns are standardised and categorical
/// columns one-hot encoded. With binning: continuous columns become
/// equal-frequency bin indices and categorical columns keep their codes, so
/// every output column is categorical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessPlan {
    input_schema: Vec<ColumnKind>,
    columns: Vec<ColumnPlan>,
    binned: bool,
}

impl PreprocessPlan {
    pub fn columns(&self) -> &[ColumnPlan] {
        &self.columns
    }

    pub fn is_binned(&self) -> bool {
        self.binned
    }

    /// Number of output columns.
    pub fn output_width(&self) -> usize {
        self.columns.iter().map(ColumnPlan::width).sum()
    }

    pub fn output_schema(&self) -> Vec<ColumnKind> {
        let mut schema = Vec::with_capacity(self.output_width());
        for col in &self.columns {
            match col {
                ColumnPlan::Dropped => {}
                ColumnPlan::Standardize { .. } => schema.push(ColumnKind::Continuous),
                ColumnPlan::OneHot { cardinality } => {
                    schema.extend(std::iter::repeat_n(ColumnKind::Categorical { cardinality: 2 }, *cardinality))
                }
                ColumnPlan::Bin { edges } => schema.push(ColumnKind::Categorical { cardinality: edges.len() + 1 }),
                ColumnPlan::Code { cardinality } => schema.push(ColumnKind::Categorical { cardinality: *cardinality }),
            }
        }
        schema
    }

    /// Transforms a raw feature matrix with the fitted schema.
    pub fn transform(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.input_schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "plan expects {} columns, got {}",
                self.input_schema.len(),
                features.ncols()
            )));
        }
        let n = features.nrows();
        let width = self.output_width();
        let mut out = Array2::zeros((n, width));
        let mut offset = 0;
        for (c, col) in self.columns.iter().enumerate() {
            let input = features.column(c);
            match col {
                ColumnPlan::Dropped => {}
                ColumnPlan::Standardize { mean, std } => {
                    for (i, &v) in input.iter().enumerate() {
                        out[[i, offset]] = (v - mean) / std;
                    }
                }
                ColumnPlan::OneHot { cardinality } => {
                    for (i, &v) in input.iter().enumerate() {
                        let code = categorical_code(v, *cardinality, c)?;
                        out[[i, offset + code]] = 1.0;
                    }
                }
                ColumnPlan::Bin { edges } => {
                    for (i, &v) in input.iter().enumerate() {
                        out[[i, offset]] = bin_index(edges, v) as f64;
                    }
                }
                ColumnPlan::Code { cardinality } => {
                    for (i, &v) in input.iter().enumerate() {
                        out[[i, offset]] = categorical_code(v, *cardinality, c)? as f64;
                    }
                }
            }
            offset += col.width();
        }
        Ok(out)
    }
}

fn categorical_code(v: f64, cardinality: usize, column: usize) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || v as usize >= cardinality {
        return Err(Error::SchemaMismatch(format!("column {column}: code {v} outside 0..{cardinality}")));
    }
    Ok(v as usize)
}

/// Number of edges strictly below `v`; out-of-range values land in the
/// extreme bins.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e < v)
}

/// Interior edges splitting `values` into `bins` groups of near-equal size.
/// Ties that straddle a cut remove that edge, so heavily tied columns get
/// fewer bins.
pub fn equal_frequency_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = Vec::with_capacity(bins.saturating_sub(1));
    for k in 1..bins {
        let pos = k * n / bins;
        if pos == 0 || pos >= n || sorted[pos - 1] >= sorted[pos] {
            continue;
        }
        let edge = 0.5 * (sorted[pos - 1] + sorted[pos]);
        if edges.last().is_none_or(|&last| edge > last) {
            edges.push(edge);
        }
    }
    edges
}

/// Fits standardisation / one-hot (or binning) parameters on `train`.
pub fn fit_preprocess(train: &Dataset, bin_continuous: bool, bins_per_feature: usize) -> Result<PreprocessPlan> {
    if bin_continuous && bins_per_feature < 2 {
        return Err(Error::InvalidArgument(format!("bins_per_feature must be >= 2, got {bins_per_feature}")));
    }
    let n = train.n_instances() as f64;
    let mut columns = Vec::with_capacity(train.n_features());
    for (c, kind) in train.schema.iter().enumerate() {
        let values = train.features.column(c);
        let mean = values.sum() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let constant = values.iter().all(|&v| v == values[0]);
        let plan = match (*kind, bin_continuous) {
            (_, _) if constant => ColumnPlan::Dropped,
            (ColumnKind::Continuous, false) => ColumnPlan::Standardize { mean, std: var.sqrt() },
            (ColumnKind::Continuous, true) => {
                let edges = equal_frequency_edges(&values.to_vec(), bins_per_feature);
                ColumnPlan::Bin { edges }
            }
            (ColumnKind::Categorical { cardinality }, false) => ColumnPlan::OneHot { cardinality },
            (ColumnKind::Categorical { cardinality }, true) => ColumnPlan::Code { cardinality },
        };
        columns.push(plan);
    }
    let plan = PreprocessPlan { input_schema: train.schema.clone(), columns, binned: bin_continuous };
    if plan.output_width() == 0 {
        return Err(Error::InvalidDataset("every feature column is constant on the training data".into()));
    }
    Ok(plan)
}

/// Applies a fitted plan, keeping labels and name.
pub fn apply_preprocess(plan: &PreprocessPlan, data: &Dataset) -> Result<Dataset> {
    if data.schema != plan.input_schema {
        return Err(Error::SchemaMismatch("dataset schema differs from the fitted plan".into()));
    }
    let features = plan.transform(&data.features)?;
    let mut out = Dataset::new(data.name.clone(), features, data.labels.clone(), data.n_classes, plan.output_schema())?;
    out.class_names = data.class_names.clone();
    Ok(out)
}

/// Isotropic Gaussian blobs, one per class, with `n_per_class[j]` points
/// around `means[j]`. Deterministic given `seed`.
pub fn synth_gaussian(n_per_class: &[usize], means: &[Vec<f64>], stddev: f64, seed: u64) -> Result<Dataset> {
    let l = n_per_class.len();
    if l < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {l}")));
    }
    if means.len() != l {
        return Err(Error::LengthMismatch { expected: l, got: means.len() });
    }
    if let Some(c) = n_per_class.iter().position(|&n| n == 0) {
        return Err(Error::InvalidArgument(format!("class {c} requested with zero instances")));
    }
    let d = means[0].len();
    if d == 0 || means.iter().any(|m| m.len() != d) {
        return Err(Error::InvalidArgument("class means must share a positive dimension".into()));
    }
    if !(stddev > 0.0 && stddev.is_finite()) {
        return Err(Error::InvalidArgument(format!("stddev must be positive, got {stddev}")));
    }
    let normal = Normal::new(0.0, stddev).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = n_per_class.iter().sum();
    let mut values = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    for (class, (&count, mean)) in n_per_class.iter().zip(means).enumerate() {
        for _ in 0..count {
            values.extend(mean.iter().map(|&m| m + normal.sample(&mut rng)));
            labels.push(class);
        }
    }
    let features = Array2::from_shape_vec((total, d), values).expect("shape matches");
    Dataset::new("synthetic", features, labels, l, vec![ColumnKind::Continuous; d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_recodes_labels_by_first_appearance() {
        let f = write_tmp("x,y\n1.0,a\n2.0,b\n3.0,a\n");
        let d = load_csv(f.path(), "y", &[]).unwrap();
        assert_eq!(d.labels(), &[0, 1, 0]);
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.class_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn load_drops_rows_with_missing_cells() {
        let f = write_tmp("x,c,y\n1.0,u,a\n,v,b\n3.0,w,b\n4.0,?,a\n");
        let d = load_csv(f.path(), "y", &["c"]).unwrap();
        assert_eq!(d.n_instances(), 2);
        assert_eq!(d.features().column(0).to_vec(), vec![1.0, 3.0]);
        assert_eq!(d.schema()[1], ColumnKind::Categorical { cardinality: 2 });
    }

    #[test]
    fn load_errors() {
        let f = write_tmp("x,y\n1.0,a\n2.0,b\n");
        let err = load_csv(f.path(), "label", &[]).unwrap_err();
        assert!(err.to_string().contains("missing target column"));

        let f = write_tmp("x,y\n1.0,a\nabc,b\n");
        assert!(matches!(load_csv(f.path(), "y", &[]), Err(Error::NonNumeric { .. })));

        let f = write_tmp("x,y\n,a\n2.0,\n");
        assert!(matches!(load_csv(f.path(), "y", &[]), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn csv_round_trip() {
        let data = synth_gaussian(&[4, 3], &[vec![0.0, 1.0], vec![2.0, -1.0]], 0.7, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&data, &path, "target").unwrap();
        let back = load_csv(&path, "target", &[]).unwrap();
        assert_eq!(back.labels(), data.labels());
        assert_eq!(back.features(), data.features());
    }

    fn continuous(values: Vec<f64>) -> Dataset {
        let n = values.len();
        let labels = (0..n).map(|i| i % 2).collect();
        Dataset::new("t", Array2::from_shape_vec((n, 1), values).unwrap(), labels, 2, vec![ColumnKind::Continuous])
            .unwrap()
    }

    #[test]
    fn equal_frequency_example() {
        assert_eq!(equal_frequency_edges(&[1.0, 2.0, 3.0, 4.0], 2), vec![2.5]);
        let plan = fit_preprocess(&continuous(vec![1.0, 2.0, 3.0, 4.0]), true, 2).unwrap();
        assert_eq!(plan.columns()[0], ColumnPlan::Bin { edges: vec![2.5] });
        assert!(fit_preprocess(&continuous(vec![1.0, 2.0]), true, 1).is_err());
    }

    #[test]
    fn constant_column_dropped() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let d = Dataset::new("t", x, vec![0, 1, 0], 2, vec![ColumnKind::Continuous; 2]).unwrap();
        let plan = fit_preprocess(&d, false, 10).unwrap();
        assert_eq!(plan.columns()[1], ColumnPlan::Dropped);
        assert_eq!(plan.output_width(), 1);
    }

    #[test]
    fn one_hot_encoding() {
        let x = array![[0.0], [1.0], [2.0]];
        let d = Dataset::new("t", x, vec![0, 1, 0], 2, vec![ColumnKind::Categorical { cardinality: 3 }]).unwrap();
        let plan = fit_preprocess(&d, false, 10).unwrap();
        assert_eq!(plan.columns()[0], ColumnPlan::OneHot { cardinality: 3 });
        let out = apply_preprocess(&plan, &d).unwrap();
        assert_eq!(out.features().row(2).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn standardized_means_are_zero() {
        let data = synth_gaussian(&[30, 20], &[vec![1.0, -3.0], vec![4.0, 2.0]], 2.0, 1).unwrap();
        let plan = fit_preprocess(&data, false, 10).unwrap();
        let out = apply_preprocess(&plan, &data).unwrap();
        for col in out.features().columns() {
            assert_abs_diff_eq!(col.mean().unwrap(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn out_of_range_values_clamp_to_extreme_bins() {
        let plan = fit_preprocess(&continuous(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), true, 3).unwrap();
        let out = plan.transform(&array![[-100.0], [100.0]]).unwrap();
        assert_eq!(out[[0, 0]], 0.0);
        assert_eq!(out[[1, 0]], 2.0);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let plan = fit_preprocess(&continuous(vec![1.0, 2.0, 3.0]), false, 10).unwrap();
        let other =
            Dataset::new("o", array![[0.0]], vec![0], 2, vec![ColumnKind::Categorical { cardinality: 1 }]).unwrap();
        assert!(matches!(apply_preprocess(&plan, &other), Err(Error::SchemaMismatch(_))));
        assert!(plan.transform(&array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn synth_is_deterministic_and_validated() {
        let means = [vec![0.0, 0.0], vec![3.0, 3.0]];
        let a = synth_gaussian(&[5, 5], &means, 1.0, 42).unwrap();
        let b = synth_gaussian(&[5, 5], &means, 1.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(synth_gaussian(&[0, 5], &means, 1.0, 42).is_err());
        assert!(synth_gaussian(&[5, 5], &means, 0.0, 42).is_err());
    }

    #[test]
    fn separated_blobs_are_one_nn_separable() {
        let data = synth_gaussian(&[40, 40], &[vec![0.0, 0.0], vec![50.0, 50.0]], 1.0, 5).unwrap();
        let rows: Vec<Vec<f64>> = data.features().rows().into_iter().map(|r| r.to_vec()).collect();
        assert_eq!(crate::oracle::oracle_one_nn_accuracy(&rows, data.labels()), 1.0);
    }

    proptest! {
        #[test]
        fn equal_frequency_bin_sizes(n in 2usize..200, bins in 2usize..12, seed in 0u64..1000) {
            // Distinct values.
            let values: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 100_003) as f64 + i as f64 * 1e-6).collect();
            let edges = equal_frequency_edges(&values, bins);
            let mut sizes = vec![0usize; edges.len() + 1];
            for &v in &values {
                sizes[bin_index(&edges, v)] += 1;
            }
            let (lo, hi) = (n / bins, n.div_ceil(bins));
            if n >= bins {
                for s in sizes {
                    prop_assert!(s >= lo && s <= hi, "size {} not in [{}, {}]", s, lo, hi);
                }
            }
            prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn plan_width_matches_output(seed in 0u64..500, binned in any::<bool>()) {
            let data = synth_gaussian(&[6, 9], &[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, -1.0]], 1.0, seed).unwrap();
            let plan = fit_preprocess(&data, binned, 4).unwrap();
            let out = apply_preprocess(&plan, &data).unwrap();
            prop_assert_eq!(out.n_features(), plan.output_width());
        }
    }
}
