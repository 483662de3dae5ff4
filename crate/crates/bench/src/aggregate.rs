//! Mean errors per (dataset, method), ranking and report files.

use std::collections::BTreeMap;
use std::path::Path;

use quantification::{RankReport, ShiftCategory};

use crate::error::{BenchError, Result};
use crate::record::{ResultRecord, Status};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ae,
    Nkld,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ae => "ae",
            Metric::Nkld => "nkld",
        }
    }

    fn of(self, r: &ResultRecord) -> Option<f64> {
        match self {
            Metric::Ae => r.ae,
            Metric::Nkld => r.nkld,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ae" => Ok(Metric::Ae),
            "nkld" => Ok(Metric::Nkld),
            other => Err(BenchError::Config(format!("unknown metric `{other}` (expected ae or nkld)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Filter {
    pub shift: Option<ShiftCategory>,
    /// Training fraction of the split.
    pub split: Option<f64>,
}

impl Filter {
    pub fn accepts(&self, r: &ResultRecord) -> bool {
        self.shift.is_none_or(|s| r.shift_category == s)
            && self.split.is_none_or(|f| (r.train_fraction - f).abs() < 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub report: RankReport,
    /// Datasets dropped because some method had no result under the filter.
    pub dropped: Vec<String>,
}

/// Ranks methods by their mean error per dataset. Datasets and methods keep
/// their first-appearance order.
pub fn aggregate(records: &[ResultRecord], metric: Metric, filter: Filter) -> Result<Aggregate> {
    let mut datasets: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
        let Some(method) = r.method.as_deref() else { continue };
        if !methods.contains(&method) {
            methods.push(method);
        }
        if r.status != Status::Ok || !filter.accepts(r) {
            continue;
        }
        let Some(v) = metric.of(r) else { continue };
        let d = datasets.iter().position(|&x| x == r.dataset).unwrap();
        let m = methods.iter().position(|&x| x == method).unwrap();
        let e = sums.entry((d, m)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    if methods.is_empty() {
        return Err(BenchError::Data("no method results to aggregate".into()));
    }
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (d, name) in datasets.iter().enumerate() {
        let row: Option<Vec<f64>> = (0..methods.len()).map(|m| sums.get(&(d, m)).map(|&(s, n)| s / n as f64)).collect();
        match row {
            Some(row) => {
                kept.push(name.to_string());
                rows.push(row);
            }
            None => dropped.push(name.to_string()),
        }
    }
    if kept.is_empty() {
        return Err(BenchError::Data("no dataset has results for every method under this filter".into()));
    }
    let report = RankReport::build(kept, methods.iter().map(|m| m.to_string()).collect(), rows, ALPHA)
        .map_err(|e| BenchError::Data(e.to_string()))?;
    Ok(Aggregate { report, dropped })
}

/// Writes markdown tables, CSV and CD-diagram data for both metrics, over all
/// results and per shift category. Returns the written file names.
pub fn write_report(records: &[ResultRecord], out: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out).map_err(|e| BenchError::io(out, e))?;
    let mut written = Vec::new();
    let mut summary = String::from("# Quantification benchmark report\n");
    let scopes = [
        ("all", None),
        ("minor", Some(ShiftCategory::Minor)),
        ("medium", Some(ShiftCategory::Medium)),
        ("major", Some(ShiftCategory::Major)),
    ];
    for metric in [Metric::Ae, Metric::Nkld] {
        for (scope, shift) in scopes {
            let agg = match aggregate(records, metric, Filter { shift, split: None }) {
                Ok(a) => a,
                Err(_) if shift.is_some() => continue,
                Err(e) => return Err(e),
            };
            let stem = format!("{}_{scope}", metric.as_str());
            let files = [
                (format!("ranking_{stem}.csv"), agg.report.to_csv()),
                (format!("cd_{stem}.csv"), agg.report.cd_diagram_csv()),
            ];
            for (name, body) in files {
                let path = out.join(&name);
                std::fs::write(&path, body).map_err(|e| BenchError::io(&path, e))?;
                written.push(name);
            }
            summary.push_str(&format!("\n## {} ({scope} shift)\n\n", metric.as_str().to_uppercase()));
            if !agg.dropped.is_empty() {
                summary.push_str(&format!("Dropped datasets with missing methods: {}\n\n", agg.dropped.join(", ")));
            }
            summary.push_str(&agg.report.to_markdown());
        }
    }
    let path = out.join("report.md");
    std::fs::write(&path, summary).map_err(|e| BenchError::io(&path, e))?;
    written.push("report.md".into());
    Ok(written)
}
