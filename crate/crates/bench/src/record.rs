//! Result rows and their CSV form.

use std::fmt;
use std::str::FromStr;

use quantification::quantify::Flags;
use quantification::ShiftCategory;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Skipped,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Skipped => "skipped",
            Status::Failed => "failed",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(Status::Ok),
            "skipped" => Ok(Status::Skipped),
            "failed" => Ok(Status::Failed),
            other => Err(BenchError::Data(format!("unknown status `{other}`"))),
        }
    }
}

/// One method's result on one draw. Skipped draws carry no method and no
/// estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub unit: usize,
    pub dataset: String,
    pub train_dist: Vec<f64>,
    pub test_dist: Vec<f64>,
    pub train_fraction: f64,
    pub seed: u64,
    pub shift_category: ShiftCategory,
    pub method: Option<String>,
    pub estimate: Option<Vec<f64>>,
    pub true_dist: Option<Vec<f64>>,
    pub ae: Option<f64>,
    pub nkld: Option<f64>,
    pub wall_time_ms: f64,
    pub flags: Flags,
    pub scores_hash: Option<u64>,
    pub status: Status,
    pub reason: String,
}

/// Column names of the result file, in order.
pub const COLUMNS: [&str; 19] = [
    "unit",
    "dataset",
    "train_dist",
    "test_dist",
    "train_fraction",
    "seed",
    "shift_category",
    "method",
    "estimate",
    "true_dist",
    "ae",
    "nkld",
    "wall_time_ms",
    "clipped",
    "non_converged",
    "fallback",
    "scores_hash",
    "status",
    "reason",
];

/// Semicolon-joined, six fractional digits.
pub fn format_dist(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(";")
}

pub fn parse_dist(field: &str) -> Result<Vec<f64>> {
    field
        .split(';')
        .map(|v| v.parse::<f64>().map_err(|_| BenchError::Data(format!("bad distribution entry `{v}`"))))
        .collect()
}

fn optional<T>(field: &str, parse: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field).map(Some)
    }
}

fn number<T: FromStr>(field: &str, column: &str) -> Result<T> {
    field.parse().map_err(|_| BenchError::Data(format!("bad {column} value `{field}`")))
}

fn flag(field: &str, column: &str) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(BenchError::Data(format!("bad {column} value `{field}`"))),
    }
}

impl ResultRecord {
    /// Field values in [`COLUMNS`] order.
    pub fn to_fields(&self) -> Vec<String> {
        let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let b = |v: bool| if v { "1" } else { "0" }.to_string();
        vec![
            self.unit.to_string(),
            self.dataset.clone(),
            format_dist(&self.train_dist),
            format_dist(&self.test_dist),
            self.train_fraction.to_string(),
            self.seed.to_string(),
            self.shift_category.as_str().to_string(),
            self.method.clone().unwrap_or_default(),
            self.estimate.as_deref().map(format_dist).unwrap_or_default(),
            self.true_dist.as_deref().map(format_dist).unwrap_or_default(),
            opt_f(self.ae),
            opt_f(self.nkld),
            format!("{:.3}", self.wall_time_ms),
            b(self.flags.clipped),
            b(self.flags.non_converged),
            b(self.flags.fallback),
            self.scores_hash.map(|h| format!("{h:016x}")).unwrap_or_default(),
            self.status.to_string(),
            self.reason.clone(),
        ]
    }

    pub fn from_fields(f: &csv::StringRecord) -> Result<Self> {
        if f.len() != COLUMNS.len() {
            return Err(BenchError::Data(format!("expected {} columns, found {}", COLUMNS.len(), f.len())));
        }
        Ok(Self {
            unit: number(&f[0], "unit")?,
            dataset: f[1].to_string(),
            train_dist: parse_dist(&f[2])?,
            test_dist: parse_dist(&f[3])?,
            train_fraction: number(&f[4], "train_fraction")?,
            seed: number(&f[5], "seed")?,
            shift_category: ShiftCategory::parse(&f[6])
                .ok_or_else(|| BenchError::Data(format!("bad shift_category `{}`", &f[6])))?,
            method: optional(&f[7], |s| Ok(s.to_string()))?,
            estimate: optional(&f[8], parse_dist)?,
            true_dist: optional(&f[9], parse_dist)?,
            ae: optional(&f[10], |s| number(s, "ae"))?,
            nkld: optional(&f[11], |s| number(s, "nkld"))?,
            wall_time_ms: number(&f[12], "wall_time_ms")?,
            flags: Flags {
                clipped: flag(&f[13], "clipped")?,
                non_converged: flag(&f[14], "non_converged")?,
                fallback: flag(&f[15], "fallback")?,
            },
            scores_hash: optional(&f[16], |s| {
                u64::from_str_radix(s, 16).map_err(|_| BenchError::Data(format!("bad scores_hash `{s}`")))
            })?,
            status: f[17].parse()?,
            reason: f[18].to_string(),
        })
    }
}

/// Serializes records (without header) to CSV bytes.
pub fn encode(records: &[ResultRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in records {
        w.write_record(r.to_fields())?;
    }
    w.into_inner().map_err(|e| BenchError::Data(e.to_string()))
}

pub fn header() -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    w.into_inner().map_err(|e| BenchError::Data(e.to_string()))
}

/// Reads every record of a result file.
pub fn read_results(path: &std::path::Path) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(BenchError::Data(format!("{}: unexpected header", path.display())));
    }
    r.records().map(|row| ResultRecord::from_fields(&row?)).collect()
}
