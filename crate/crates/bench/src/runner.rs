//! Orchestration of datasets × scenarios × seeds × methods.

use std::fs::{File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use quantification::metrics::{ae, nkld, NKLD_EPSILON};
use quantification::quantify::{DrawContext, Flags};
use quantification::sampling::{draw_split, ShiftMode};
use quantification::{Dataset, ScenarioSpec};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{BenchError, Result};
use crate::record::{encode, header, ResultRecord, Status};

pub const RESULTS_FILE: &str = "results.csv";
pub const INDEX_FILE: &str = "results.csv.index";

/// One draw: a dataset, a scenario and a seed.
#[derive(Debug, Clone)]
pub struct Unit {
    pub id: usize,
    pub dataset: usize,
    pub spec: ScenarioSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub units: usize,
    pub resumed_from: usize,
    pub rows: usize,
    pub skipped: usize,
    pub failed: usize,
    pub results: PathBuf,
}

impl RunSummary {
    /// Exit code: 0 when every row succeeded, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.skipped + self.failed > 0 {
            3
        } else {
            0
        }
    }
}

/// Units in canonical order: dataset, then scenario, then seed.
pub fn plan_units(config: &RunConfig, datasets: &[Dataset]) -> Result<Vec<Unit>> {
    let mut units = Vec::new();
    for (d, data) in datasets.iter().enumerate() {
        let scenarios = config
            .scenarios_for(data.n_classes())
            .map_err(|e| BenchError::Data(format!("dataset `{}`: {e}", data.name())))?;
        for scenario in &scenarios {
            for &seed in &config.seeds {
                units.push(Unit { id: units.len(), dataset: d, spec: scenario.with_seed(seed) });
            }
        }
    }
    Ok(units)
}

fn shift_mode(n_classes: usize) -> ShiftMode {
    if n_classes == 2 {
        ShiftMode::Binary
    } else {
        ShiftMode::Multiclass
    }
}

/// Runs every configured method on one draw.
pub fn run_unit(config: &RunConfig, data: &Dataset, unit: &Unit) -> Vec<ResultRecord> {
    let spec = &unit.spec;
    let base = ResultRecord {
        unit: unit.id,
        dataset: data.name().to_string(),
        train_dist: spec.train_dist.clone(),
        test_dist: spec.test_dist.clone(),
        train_fraction: spec.train_fraction,
        seed: spec.seed,
        shift_category: spec.shift_category(shift_mode(data.n_classes())),
        method: None,
        estimate: None,
        true_dist: None,
        ae: None,
        nkld: None,
        wall_time_ms: 0.0,
        flags: Flags::default(),
        scores_hash: None,
        status: Status::Skipped,
        reason: String::new(),
    };
    let skipped = |reason: String| vec![ResultRecord { reason, ..base.clone() }];

    let split = match draw_split(data, spec) {
        Ok(s) => s,
        Err(e) => return skipped(e.to_string()),
    };
    if let Some(j) = split.train_counts.iter().position(|&c| c == 0) {
        return skipped(format!("class {j} has no training instances"));
    }
    let (train, test) = match (data.subset(&split.train_indices), data.subset(&split.test_indices)) {
        (Ok(tr), Ok(te)) => (tr, te),
        (Err(e), _) | (_, Err(e)) => return skipped(e.to_string()),
    };
    let ctx = match DrawContext::new(&train, test.features(), config.classifier.clone(), config.feature_bins, spec.seed)
    {
        Ok(c) => c,
        Err(e) => return skipped(e.to_string()),
    };
    let truth = split.realized_test_dist.clone();

    config
        .methods
        .iter()
        .map(|m| {
            let qspec = m.spec(&config.classifier, data.n_classes());
            let start = Instant::now();
            let outcome = ctx.quantify(&qspec);
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let wall_time_ms = if config.record_wall_time { elapsed } else { 0.0 };
            let mut rec = ResultRecord {
                method: Some(m.method.id().to_string()),
                true_dist: Some(truth.clone()),
                wall_time_ms,
                ..base.clone()
            };
            let scored = outcome.and_then(|est| {
                let p = est.prevalence.values().to_vec();
                let e_ae = ae(&truth, &p)?;
                let e_nkld = nkld(&truth, &p, NKLD_EPSILON)?;
                Ok((est, p, e_ae, e_nkld))
            });
            match scored {
                Ok((est, p, e_ae, e_nkld)) => {
                    rec.estimate = Some(p);
                    rec.ae = Some(e_ae);
                    rec.nkld = Some(e_nkld);
                    rec.flags = est.flags;
                    rec.scores_hash = est.scores_hash;
                    rec.status = Status::Ok;
                }
                Err(e) => {
                    rec.status = Status::Failed;
                    rec.reason = e.to_string();
                }
            }
            rec
        })
        .collect()
}

/// Loads every configured dataset.
pub fn load_datasets(config: &RunConfig) -> Result<Vec<Dataset>> {
    let datasets = config.datasets.iter().map(|d| d.load(&config.base_dir)).collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = datasets.iter().map(Dataset::name).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(BenchError::Config(format!("dataset name `{}` is used twice", w[0])));
    }
    Ok(datasets)
}

/// Progress recorded in the index sidecar: completed unit count and the
/// result-file length after the last completed unit.
fn read_index(path: &Path, fingerprint: u64) -> Result<Option<(usize, u64)>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(BenchError::io(path, e)),
    };
    // Only newline-terminated lines are complete; a torn final line reruns its unit.
    let complete = &text[..text.rfind('\n').map_or(0, |i| i + 1)];
    let mut lines = complete.lines();
    let Some(head) = lines.next() else { return Ok(None) };
    if head != format!("config {fingerprint:016x}") {
        return Err(BenchError::Config(format!(
            "{} belongs to a different configuration; remove the output directory or choose another",
            path.display()
        )));
    }
    let mut progress = None;
    for line in lines {
        let mut parts = line.split_whitespace();
        let parsed = (|| Some((parts.next()?.parse::<usize>().ok()?, parts.next()?.parse::<u64>().ok()?)))();
        match parsed {
            Some((unit, offset)) => progress = Some((unit + 1, offset)),
            None => break,
        }
    }
    Ok(progress)
}

/// Rewrites the index for the first `done` units, dropping any torn tail.
fn rewrite_index(path: &Path, fingerprint: u64, done: &[Unit], last_offset: u64) -> Result<File> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut kept = format!("config {fingerprint:016x}\n");
    for line in text.lines().skip(1).take(done.len()) {
        kept.push_str(line);
        kept.push('\n');
    }
    debug_assert!(kept.trim_end().ends_with(&last_offset.to_string()));
    std::fs::write(path, kept).map_err(|e| BenchError::io(path, e))?;
    OpenOptions::new().append(true).open(path).map_err(|e| BenchError::io(path, e))
}

/// Executes the configured run, resuming from the index sidecar if present.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let datasets = load_datasets(config)?;
    let units = plan_units(config, &datasets)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| BenchError::io(&config.output_dir, e))?;
    let results_path = config.output_dir.join(RESULTS_FILE);
    let index_path = config.output_dir.join(INDEX_FILE);

    let progress = if results_path.exists() { read_index(&index_path, config.fingerprint)? } else { None };
    let (start, mut results, mut index) = match progress {
        Some((done, offset)) => {
            let mut results =
                OpenOptions::new().write(true).open(&results_path).map_err(|e| BenchError::io(&results_path, e))?;
            results.set_len(offset).map_err(|e| BenchError::io(&results_path, e))?;
            results.seek(SeekFrom::End(0)).map_err(|e| BenchError::io(&results_path, e))?;
            let index = rewrite_index(&index_path, config.fingerprint, &units[..done], offset)?;
            (done, results, index)
        }
        None => {
            let mut results = File::create(&results_path).map_err(|e| BenchError::io(&results_path, e))?;
            results.write_all(&header()?).map_err(|e| BenchError::io(&results_path, e))?;
            let mut index = File::create(&index_path).map_err(|e| BenchError::io(&index_path, e))?;
            writeln!(index, "config {:016x}", config.fingerprint).map_err(|e| BenchError::io(&index_path, e))?;
            (0, results, index)
        }
    };
    let mut offset = results.metadata().map_err(|e| BenchError::io(&results_path, e))?.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let mut summary =
        RunSummary { units: units.len(), resumed_from: start, results: results_path.clone(), ..Default::default() };
    let chunk = config.workers.max(1) * 4;
    for batch in units[start.min(units.len())..].chunks(chunk) {
        let rows: Vec<Vec<ResultRecord>> =
            pool.install(|| batch.par_iter().map(|u| run_unit(config, &datasets[u.dataset], u)).collect());
        for (unit, recs) in batch.iter().zip(rows) {
            let bytes = encode(&recs)?;
            results.write_all(&bytes).map_err(|e| BenchError::io(&results_path, e))?;
            results.flush().map_err(|e| BenchError::io(&results_path, e))?;
            offset += bytes.len() as u64;
            writeln!(index, "{} {offset}", unit.id).map_err(|e| BenchError::io(&index_path, e))?;
            summary.rows += recs.len();
            summary.skipped += recs.iter().filter(|r| r.status == Status::Skipped).count();
            summary.failed += recs.iter().filter(|r| r.status == Status::Failed).count();
        }
    }
    Ok(summary)
}
