use std::path::{Path, PathBuf};
use std::process::Command;

use quantification::metrics::{ae, nkld, NKLD_EPSILON};
use quantification::ShiftCategory;
use quantification_bench::runner::{load_datasets, plan_units, run_unit, INDEX_FILE, RESULTS_FILE};
use quantification_bench::{aggregate, read_results, run, Filter, Metric, RunConfig, Status};

fn synthetic_config(out: &Path, grid: &str, methods: &str, workers: usize, extra: &str) -> String {
    format!(
        r#"
output_dir = "{}"
grid = "{grid}"
seeds = [0]
workers = {workers}
record_wall_time = false
methods = {methods}
{extra}
[[datasets]]
kind = "synthetic"
name = "blobs"
n_per_class = [150, 100]
means = [[0.0, 0.0], [1.5, 1.0]]
stddev = 1.0
seed = 11
"#,
        out.display()
    )
}

fn parse(text: &str, dir: &Path) -> RunConfig {
    RunConfig::parse(text, dir).unwrap()
}

#[test]
fn binary_grid_row_count_and_recomputable_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse(&synthetic_config(dir.path(), "binary", r#"["cc", "acc", "dys"]"#, 4, ""), dir.path());
    let summary = run(&config).unwrap();
    assert_eq!(summary.units, 288);
    let records = read_results(&summary.results).unwrap();
    let skipped = records.iter().filter(|r| r.status == Status::Skipped).count();
    assert_eq!(records.len(), (288 - skipped) * 3 + skipped);
    assert_eq!(summary.rows, records.len());
    for r in &records {
        match r.status {
            Status::Skipped => assert!(r.method.is_none() && !r.reason.is_empty()),
            Status::Ok => {
                let (p, t) = (r.true_dist.as_ref().unwrap(), r.estimate.as_ref().unwrap());
                // The file keeps six digits per entry.
                assert!((ae(p, t).unwrap() - r.ae.unwrap()).abs() < 1e-5);
                assert!((nkld(p, t, NKLD_EPSILON).unwrap() - r.nkld.unwrap()).abs() < 1e-4);
            }
            Status::Failed => panic!("unexpected failure: {}", r.reason),
        }
    }

    let datasets = load_datasets(&config).unwrap();
    let units = plan_units(&config, &datasets).unwrap();
    for unit in units.iter().step_by(37) {
        for r in run_unit(&config, &datasets[0], unit).iter().filter(|r| r.status == Status::Ok) {
            let (p, t) = (r.true_dist.as_ref().unwrap(), r.estimate.as_ref().unwrap());
            assert!((ae(p, t).unwrap() - r.ae.unwrap()).abs() <= 1e-12);
            assert!((nkld(p, t, NKLD_EPSILON).unwrap() - r.nkld.unwrap()).abs() <= 1e-12);
        }
    }
}

const CUSTOM: &str = r#"
[[scenarios]]
train_dist = [0.5, 0.5]
test_dist = [0.2, 0.8]
train_fraction = 0.5
[[scenarios]]
train_dist = [0.3, 0.7]
test_dist = [0.9, 0.1]
train_fraction = 0.3
[[scenarios]]
train_dist = [0.7, 0.3]
test_dist = [0.6, 0.4]
train_fraction = 0.7
"#;

fn all_methods() -> String {
    let ids: Vec<String> = quantification::Method::ALL.iter().map(|m| format!("\"{}\"", m.id())).collect();
    format!("[{}]", ids.join(", "))
}

#[test]
fn every_method_sees_the_same_draw_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse(&synthetic_config(dir.path(), "custom", &all_methods(), 2, CUSTOM), dir.path());
    let summary = run(&config).unwrap();
    let records = read_results(&summary.results).unwrap();
    assert_eq!(records.len(), 3 * 20);
    for unit in 0..3 {
        let rows: Vec<_> = records.iter().filter(|r| r.unit == unit).collect();
        assert!(rows.iter().all(|r| r.status == Status::Ok), "{rows:?}");
        assert!(rows.iter().all(|r| r.true_dist == rows[0].true_dist));
        let hashes: Vec<u64> = rows
            .iter()
            .filter(|r| {
                matches!(r.method.as_deref(), Some("cc" | "pcc" | "gac" | "gpac" | "hdy" | "fm" | "em" | "cde"))
            })
            .map(|r| r.scores_hash.unwrap())
            .collect();
        assert_eq!(hashes.len(), 8);
        assert!(hashes.windows(2).all(|w| w[0] == w[1]));
        for r in rows.iter().filter(|r| matches!(r.method.as_deref(), Some("readme" | "hdx" | "ed" | "pwk"))) {
            assert_eq!(r.scores_hash, None);
        }
    }
}

#[test]
fn interrupted_runs_resume_to_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse(&synthetic_config(dir.path(), "custom", r#"["cc", "ms", "em"]"#, 2, CUSTOM), dir.path());
    run(&config).unwrap();
    let results = dir.path().join(RESULTS_FILE);
    let index = dir.path().join(INDEX_FILE);
    let full = std::fs::read(&results).unwrap();
    let full_index = std::fs::read_to_string(&index).unwrap();

    // Interrupt after the first unit, with half of the second unit's rows on disk.
    let lines: Vec<&str> = full_index.lines().collect();
    let first_end: usize = lines[1].split_whitespace().nth(1).unwrap().parse().unwrap();
    let second_end: usize = lines[2].split_whitespace().nth(1).unwrap().parse().unwrap();
    std::fs::write(&results, &full[..(first_end + second_end) / 2]).unwrap();
    std::fs::write(&index, format!("{}\n{}\n{}", lines[0], lines[1], "1 99")).unwrap();
    let summary = run(&config).unwrap();
    assert_eq!(summary.resumed_from, 1);
    assert!(std::fs::read(&results).unwrap() == full, "resumed file differs");

    std::fs::write(&results, &full[..first_end]).unwrap();
    std::fs::write(&index, format!("{}\n{}\n", lines[0], lines[1])).unwrap();
    let summary = run(&config).unwrap();
    assert_eq!(summary.resumed_from, 1);
    assert!(std::fs::read(&results).unwrap() == full, "resumed file differs");
    assert_eq!(std::fs::read_to_string(&index).unwrap(), full_index);
}

#[test]
fn output_is_independent_of_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let methods = r#"["pacc", "tsmax", "gac", "hdx", "pwk"]"#;
    run(&parse(&synthetic_config(a.path(), "custom", methods, 1, CUSTOM), a.path())).unwrap();
    run(&parse(&synthetic_config(b.path(), "custom", methods, 3, CUSTOM), b.path())).unwrap();
    assert_eq!(
        std::fs::read(a.path().join(RESULTS_FILE)).unwrap(),
        std::fs::read(b.path().join(RESULTS_FILE)).unwrap()
    );
}

fn hand_results() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/hand_results.csv")
}

#[test]
fn hand_fixture_ranks_match_manual_table() {
    let records = read_results(&hand_results()).unwrap();
    let major = Filter { shift: Some(ShiftCategory::Major), split: None };
    let agg = aggregate(&records, Metric::Ae, major).unwrap();
    assert!(agg.dropped.is_empty());
    assert_eq!(agg.report.ranks, vec![vec![2.0, 1.0, 3.0], vec![2.5, 2.5, 1.0], vec![1.0, 3.0, 2.0]]);
    let expected = [5.5 / 3.0, 6.5 / 3.0, 2.0];
    for (m, e) in ["A", "B", "C"].iter().zip(expected) {
        assert!((agg.report.average_rank(m).unwrap() - e).abs() < 1e-12);
    }

    // Unfiltered, d1's minor-shift row pushes A to last place there.
    let all = aggregate(&records, Metric::Ae, Filter::default()).unwrap();
    assert_eq!(all.report.ranks[0], vec![3.0, 1.0, 2.0]);

    let again = aggregate(&read_results(&hand_results()).unwrap(), Metric::Ae, major).unwrap();
    assert_eq!(agg, again);
}

fn qbench(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qbench")).args(args).env_remove("QUANTBENCH_OUTPUT_DIR").output().unwrap()
}

#[test]
fn cli_grid_and_exit_codes() {
    let out = qbench(&["grid", "--kind", "binary", "--print"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 289);
    let out = qbench(&["grid", "--kind", "multiclass", "--classes", "4", "--print"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 61);
    assert_eq!(qbench(&["grid", "--kind", "multiclass", "--classes", "6"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "grid = \"binary\"\nmethods = []\n").unwrap();
    assert_eq!(qbench(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(1));

    let missing = dir.path().join("missing.toml");
    let text = format!(
        "output_dir = \"out\"\ngrid = \"binary\"\nmethods = [\"cc\"]\n[[datasets]]\nkind = \"csv\"\npath = \"{}\"\ntarget = \"y\"\ncategorical = []\n",
        dir.path().join("nope.csv").display()
    );
    std::fs::write(&missing, text).unwrap();
    assert_eq!(qbench(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn cli_run_aggregate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let mut body = String::from("x1,x2,colour,label\n");
    for i in 0..120 {
        let pos = i % 3 == 0;
        let x = (i as f64 * 0.37).sin() + if pos { 1.5 } else { 0.0 };
        let y = (i as f64 * 0.71).cos();
        body.push_str(&format!("{x},{y},{},{}\n", ["red", "blue"][i % 2], if pos { "yes" } else { "no" }));
    }
    std::fs::write(&csv, body).unwrap();
    let skip_scenario = r#"
[[scenarios]]
train_dist = [0.5, 0.5]
test_dist = [0.5, 0.5]
train_fraction = 0.5
[[scenarios]]
train_dist = [0.0, 1.0]
test_dist = [0.5, 0.5]
train_fraction = 0.5
"#;
    let config = format!(
        "output_dir = \"out\"\ngrid = \"custom\"\nseeds = [0, 1]\nmethods = [\"cc\", \"pcc\"]\n{skip_scenario}\n[[datasets]]\nkind = \"csv\"\npath = \"data.csv\"\ntarget = \"label\"\ncategorical = [\"colour\"]\n"
    );
    let path = dir.path().join("run.toml");
    std::fs::write(&path, config).unwrap();
    let out = qbench(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("out").join(RESULTS_FILE);
    assert_eq!(read_results(&results).unwrap().len(), 2 * 2 + 2);

    let env_dir = dir.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_qbench"))
        .args(["run", "--config", path.to_str().unwrap()])
        .env("QUANTBENCH_OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(env_dir.join(RESULTS_FILE).exists());

    let out = qbench(&["aggregate", "--results", results.to_str().unwrap(), "--metric", "nkld", "--split", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("cc") && table.contains("pcc"));

    let report = dir.path().join("report");
    let out = qbench(&["report", "--results", results.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["report.md", "ranking_ae_all.csv", "cd_nkld_all.csv"] {
        assert!(report.join(name).exists(), "{name}");
    }
}

#[test]
fn shipped_config_parses() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/quickstart.toml");
    let config = RunConfig::from_path(&path).unwrap();
    let datasets = load_datasets(&config).unwrap();
    assert_eq!(plan_units(&config, &datasets).unwrap().len(), 2 * 288 * 3);
}
