//! Run configuration, read from a TOML file.
//!
//! ```toml
//! output_dir = "out"
//! grid = "binary"            # binary | multiclass | custom
//! seeds = [0, 1, 2]          # default: 0..=9
//! workers = 4
//! record_wall_time = true    # false writes 0 for reproducible files
//! methods = ["cc", "ms", { id = "dys", dys_bins = 20 }]
//!
//! [classifier]
//! regularization_weight = 1.0
//!
//! [hyperparameters]          # defaults for every method
//! fmm_bins = 100
//!
//! [[datasets]]
//! kind = "csv"
//! path = "data/wine.csv"
//! target = "quality"
//! categorical = []
//!
//! [[datasets]]
//! kind = "synthetic"
//! name = "blobs"
//! n_per_class = [500, 500]
//! means = [[0.0, 0.0], [2.0, 1.0]]
//! stddev = 1.0
//! seed = 7
//!
//! [[scenarios]]              # only with grid = "custom"
//! train_dist = [0.5, 0.5]
//! test_dist = [0.1, 0.9]
//! train_fraction = 0.5
//! ```

use std::path::{Path, PathBuf};

use quantification::classifier::ClassifierConfig;
use quantification::dataset::{load_csv, synth_gaussian};
use quantification::quantify::{Method, MethodParams, QuantifierSpec, Strategy};
use quantification::sampling::{binary_grid, multiclass_grid, ScenarioSpec, DEFAULT_SEEDS};
use quantification::Dataset;
use serde::Deserialize;

use crate::error::{BenchError, Result};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "QUANTBENCH_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Binary,
    Multiclass,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Csv {
        name: Option<String>,
        path: PathBuf,
        target: String,
        categorical: Vec<String>,
    },
    Synthetic {
        name: String,
        n_per_class: Vec<usize>,
        means: Vec<Vec<f64>>,
        stddev: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl DatasetSource {
    /// Loads the dataset; relative CSV paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        match self {
            DatasetSource::Csv { name, path, target, categorical } => {
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                let cats: Vec<&str> = categorical.iter().map(String::as_str).collect();
                let data =
                    load_csv(&path, target, &cats).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
                data.require_all_classes().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
                match name {
                    Some(n) => rename(data, n),
                    None => Ok(data),
                }
            }
            DatasetSource::Synthetic { name, n_per_class, means, stddev, seed } => {
                let data = synth_gaussian(n_per_class, means, *stddev, *seed)
                    .map_err(|e| BenchError::Config(format!("synthetic dataset `{name}`: {e}")))?;
                rename(data, name)
            }
        }
    }
}

fn rename(data: Dataset, name: &str) -> Result<Dataset> {
    let renamed =
        Dataset::new(name, data.features().clone(), data.labels().to_vec(), data.n_classes(), data.schema().to_vec())
            .and_then(|d| d.with_column_names(data.column_names().to_vec()))
            .and_then(|d| d.with_class_names(data.class_names().to_vec()))
            .map_err(|e| BenchError::Data(e.to_string()))?;
    Ok(renamed)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScenario {
    pub train_dist: Vec<f64>,
    pub test_dist: Vec<f64>,
    pub train_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum MethodEntry {
    Id(String),
    Table(toml::Table),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    output_dir: Option<PathBuf>,
    grid: GridKind,
    seeds: Option<Vec<u64>>,
    workers: Option<usize>,
    #[serde(default = "yes")]
    record_wall_time: bool,
    methods: Vec<MethodEntry>,
    #[serde(default)]
    classifier: ClassifierConfig,
    #[serde(default)]
    hyperparameters: toml::Table,
    datasets: Vec<DatasetSource>,
    #[serde(default)]
    scenarios: Vec<CustomScenario>,
}

fn yes() -> bool {
    true
}

/// A configured method: id, parameters and an optional explicit strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub params: MethodParams,
    pub strategy: Option<Strategy>,
}

impl MethodConfig {
    /// Concrete spec for a problem with `n_classes` classes.
    pub fn spec(&self, classifier: &ClassifierConfig, n_classes: usize) -> QuantifierSpec {
        QuantifierSpec {
            method: self.method,
            params: self.params.clone(),
            classifier: classifier.clone(),
            strategy: self.strategy.unwrap_or_else(|| self.method.default_strategy(n_classes)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub grid: GridKind,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub record_wall_time: bool,
    pub methods: Vec<MethodConfig>,
    pub classifier: ClassifierConfig,
    pub feature_bins: usize,
    pub datasets: Vec<DatasetSource>,
    pub scenarios: Vec<CustomScenario>,
    /// Directory relative dataset paths resolve against.
    pub base_dir: PathBuf,
    /// Fingerprint of the configuration text, used to validate resumes.
    pub fingerprint: u64,
}

fn config_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::Config(e.to_string())
}

fn method_config(entry: &MethodEntry, defaults: &toml::Table) -> Result<MethodConfig> {
    let (id, overrides) = match entry {
        MethodEntry::Id(id) => (id.clone(), toml::Table::new()),
        MethodEntry::Table(t) => {
            let mut t = t.clone();
            let id = match t.remove("id") {
                Some(toml::Value::String(s)) => s,
                _ => return Err(BenchError::Config("method table needs a string `id`".into())),
            };
            (id, t)
        }
    };
    let method: Method = id.parse().map_err(config_err)?;
    let mut merged = defaults.clone();
    let mut overrides = overrides;
    let strategy = match overrides.remove("strategy") {
        Some(v) => Some(v.try_into::<Strategy>().map_err(|e| config_err(format!("method `{id}` strategy: {e}")))?),
        None => None,
    };
    merged.extend(overrides);
    let params: MethodParams =
        toml::Value::Table(merged).try_into().map_err(|e| config_err(format!("method `{id}` hyperparameters: {e}")))?;
    params.validate().map_err(|e| config_err(format!("method `{id}`: {e}")))?;
    Ok(MethodConfig { method, params, strategy })
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Parses configuration text; `base_dir` anchors relative paths.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(config_err)?;
        if raw.methods.is_empty() {
            return Err(BenchError::Config("`methods` is empty".into()));
        }
        if raw.datasets.is_empty() {
            return Err(BenchError::Config("`datasets` is empty".into()));
        }
        let seeds = raw.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        if seeds.is_empty() {
            return Err(BenchError::Config("`seeds` is empty".into()));
        }
        raw.classifier.validate().map_err(config_err)?;
        let methods = raw.methods.iter().map(|m| method_config(m, &raw.hyperparameters)).collect::<Result<Vec<_>>>()?;
        let defaults: MethodParams = toml::Value::Table(raw.hyperparameters.clone()).try_into().map_err(config_err)?;
        if raw.grid == GridKind::Custom && raw.scenarios.is_empty() {
            return Err(BenchError::Config("grid = \"custom\" needs [[scenarios]]".into()));
        }
        if raw.grid != GridKind::Custom && !raw.scenarios.is_empty() {
            return Err(BenchError::Config("[[scenarios]] is only valid with grid = \"custom\"".into()));
        }
        for s in &raw.scenarios {
            ScenarioSpec::new(s.train_dist.clone(), s.test_dist.clone(), s.train_fraction, 0).map_err(config_err)?;
        }
        let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => {
                let dir = raw.output_dir.ok_or_else(|| BenchError::Config("`output_dir` is missing".into()))?;
                if dir.is_absolute() {
                    dir
                } else {
                    base_dir.join(dir)
                }
            }
        };
        let workers = raw.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));
        if workers == 0 {
            return Err(BenchError::Config("`workers` must be at least 1".into()));
        }
        let mut fp = quantification::classifier::Fnv64::new();
        fp.write(text.as_bytes());
        Ok(Self {
            output_dir,
            grid: raw.grid,
            seeds,
            workers,
            record_wall_time: raw.record_wall_time,
            methods,
            classifier: raw.classifier,
            feature_bins: defaults.feature_bins,
            datasets: raw.datasets,
            scenarios: raw.scenarios,
            base_dir: base_dir.to_path_buf(),
            fingerprint: fp.finish(),
        })
    }

    /// Scenarios for a dataset with `n_classes` classes, seed 0; the runner
    /// substitutes each configured seed.
    pub fn scenarios_for(&self, n_classes: usize) -> Result<Vec<ScenarioSpec>> {
        match self.grid {
            GridKind::Binary if n_classes == 2 => Ok(binary_grid(0)),
            GridKind::Binary => Err(BenchError::Data(format!("binary grid needs 2 classes, dataset has {n_classes}"))),
            GridKind::Multiclass => multiclass_grid(n_classes, 0).map_err(|e| BenchError::Data(e.to_string())),
            GridKind::Custom => self
                .scenarios
                .iter()
                .map(|s| {
                    if s.train_dist.len() != n_classes {
                        return Err(BenchError::Data(format!(
                            "custom scenario has {} classes, dataset has {n_classes}",
                            s.train_dist.len()
                        )));
                    }
                    ScenarioSpec::new(s.train_dist.clone(), s.test_dist.clone(), s.train_fraction, 0)
                        .map_err(config_err)
                })
                .collect(),
        }
    }
}
