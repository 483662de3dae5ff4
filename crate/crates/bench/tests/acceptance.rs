//! Acceptance suite: one pass/fail line per criterion, each at its stated
//! tolerance and time budget. Exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use quantification::classifier::logistic_objective;
use quantification::dataset::synth_gaussian;
use quantification::metrics::{ae, nkld, NKLD_EPSILON};
use quantification::quantify::count::ac;
use quantification::quantify::dm::{dys, em_quantify, fm, fmm, gac, gpac, hdy};
use quantification::quantify::{quantify, DrawContext};
use quantification::sampling::{binary_grid, draw_split, multiclass_grid, DEFAULT_SEEDS};
use quantification::stats::nemenyi_cd;
use quantification::{Estimate, FittedScores, Method, QuantifierSpec, ScenarioSpec, ShiftCategory};
use quantification_bench::runner::{load_datasets, plan_units, RESULTS_FILE};
use quantification_bench::{aggregate, read_results, run, Filter, Metric, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

type Criterion = (usize, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "nemenyi critical differences", Duration::from_millis(1), nemenyi_constants),
        (2, "sampling worked example", Duration::from_secs(1), sampling_worked_example),
        (3, "grid sizes", Duration::MAX, grid_sizes),
        (4, "gac equals the adjusted-count closed form", Duration::MAX, gac_matches_closed_form),
        (5, "exact-mixture recovery", Duration::from_secs(30), exact_mixture_recovery),
        (6, "classify-and-count bias", Duration::from_secs(120), classify_and_count_bias),
        (7, "metric identities", Duration::from_secs(5), metric_identities),
        (8, "em fixed point", Duration::MAX, em_fixed_point),
        (9, "run determinism", Duration::from_secs(300), run_determinism),
        (10, "desk-scale direction check", Duration::from_secs(900), desk_scale_direction),
        (11, "logistic gradient check", Duration::from_secs(1), gradient_check),
    ];
    let mut failures = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {}", panic_message(&e))));
        let elapsed = start.elapsed();
        let in_time = elapsed < budget;
        let passed = result.passed && in_time;
        failures += usize::from(!passed);
        let budget_note = if budget == Duration::MAX { String::new() } else { format!(" (budget {budget:?})") };
        println!(
            "criterion {id:>2} {:<44} {}  {}; {elapsed:.3?}{budget_note}{}",
            name,
            if passed { "PASS" } else { "FAIL" },
            result.detail,
            if in_time { "" } else { "; over time budget" },
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn nemenyi_constants() -> Outcome {
    let a = nemenyi_cd(24, 40, 0.05).unwrap();
    let b = nemenyi_cd(20, 17, 0.05).unwrap();
    let passed = (a - 5.6973).abs() <= 0.01 && (b - 7.0045).abs() <= 0.02;
    outcome(passed, format!("cd(24,40)={a:.4} want 5.6973±0.01, cd(20,17)={b:.4} want 7.0045±0.02"))
}

fn sampling_worked_example() -> Outcome {
    let data = synth_gaussian(&[700, 300], &[vec![0.0], vec![1.0]], 1.0, 0).unwrap();
    let spec = ScenarioSpec::new(vec![0.6, 0.4], vec![0.6, 0.4], 0.8, 0).unwrap();
    let split = draw_split(&data, &spec).unwrap();
    let passed = split.train_counts == [360, 240] && split.test_counts == [90, 60];
    outcome(passed, format!("train {:?} test {:?}", split.train_counts, split.test_counts))
}

fn grid_sizes() -> Outcome {
    let binary = binary_grid(0).len();
    let multi: Vec<usize> = (3..=5).map(|l| multiclass_grid(l, 0).unwrap().len()).collect();
    let dir = tempfile::tempdir().unwrap();
    let config =
        RunConfig::parse(&synthetic_run_toml(dir.path(), "[\"cc\"]", None, 1, &[(30, 30, 0.0, 1.0, 1, 0)]), dir.path())
            .unwrap();
    let draws = plan_units(&config, &load_datasets(&config).unwrap()).unwrap().len();
    let passed = binary == 288 && draws == 2880 && multi == [60, 60, 60] && DEFAULT_SEEDS.len() == 10;
    outcome(passed, format!("binary {binary}, draws with 10 seeds {draws}, multiclass {multi:?}"))
}

/// Scores whose argmax is `predicted`.
fn crisp_row(predicted: usize) -> [f64; 2] {
    if predicted == 0 {
        [0.8, 0.2]
    } else {
        [0.3, 0.7]
    }
}

fn gac_matches_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, m) = (200usize, 1000usize);
    let mut worst = 0.0f64;
    let mut systems = 0;
    while systems < 100 {
        let tp = rng.random_range(0..=n);
        let fp = rng.random_range(0..=n);
        let (tpr, fpr) = (tp as f64 / n as f64, fp as f64 / n as f64);
        if (tpr - fpr).abs() < 0.1 {
            continue;
        }
        let k = rng.random_range(0..=m);
        let ppos = k as f64 / m as f64;
        let raw = (ppos - fpr) / (tpr - fpr);
        if !(0.01..=0.99).contains(&raw) {
            continue;
        }
        let mut oof = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            oof.extend(crisp_row(usize::from(i >= tp)));
            labels.push(0);
        }
        for i in 0..n {
            oof.extend(crisp_row(usize::from(i >= fp)));
            labels.push(1);
        }
        let scores = FittedScores::from_oof(Array2::from_shape_vec((2 * n, 2), oof).unwrap(), labels).unwrap();
        let test: Vec<f64> = (0..m).flat_map(|i| crisp_row(usize::from(i >= k))).collect();
        let test = Array2::from_shape_vec((m, 2), test).unwrap();
        let constrained = gac(&scores, &test).unwrap().prevalence.get(0);
        let closed = ac(ppos, tpr, fpr).unwrap();
        worst = worst.max((constrained - closed).abs());
        systems += 1;
    }
    outcome(worst <= 1e-6, format!("100 systems, max |gac - ac| = {worst:.2e} (tol 1e-6)"))
}

/// Out-of-fold style score rows, `per_class` per class, whose distribution
/// depends on the class.
fn class_scores(classes: usize, per_class: usize, rng: &mut ChaCha8Rng) -> FittedScores {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for _ in 0..per_class {
            let raw: Vec<f64> = (0..classes).map(|j| rng.random::<f64>() + if j == c { 1.2 } else { 0.0 }).collect();
            let s: f64 = raw.iter().sum();
            rows.extend(raw.iter().map(|v| v / s));
            labels.push(c);
        }
    }
    FittedScores::from_oof(Array2::from_shape_vec((labels.len(), classes), rows).unwrap(), labels).unwrap()
}

/// Rows of each class repeated `reps[class]` times, and the implied mixture
/// weights (classes are equally sized).
fn replicate(labels: &[usize], reps: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let rows = (0..labels.len()).flat_map(|i| std::iter::repeat_n(i, reps[labels[i]])).collect();
    let total: usize = reps.iter().sum();
    (rows, reps.iter().map(|&r| r as f64 / total as f64).collect())
}

fn random_reps(classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..classes).map(|_| rng.random_range(1..=20)).collect()
}

type ScoreMethod = fn(&FittedScores, &Array2<f64>) -> quantification::Result<Estimate>;

fn exact_mixture_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 50;
    let mut worst = Vec::new();

    let score_methods: [(&str, usize, ScoreMethod); 6] = [
        ("gac", 3, gac),
        ("gpac", 3, gpac),
        ("hdy", 3, hdy),
        ("fm", 3, fm),
        ("dys", 2, |s, t| dys(s, t, 10)),
        ("fmm", 2, |s, t| fmm(s, t, 100)),
    ];
    for (name, classes, method) in score_methods {
        let mut err = 0.0f64;
        for _ in 0..trials {
            let scores = class_scores(classes, 60, &mut rng);
            let (rows, theta) = replicate(scores.oof_labels(), &random_reps(classes, &mut rng));
            let test = scores.oof_scores().select(Axis(0), &rows);
            let est = method(&scores, &test).unwrap();
            err = err.max(l1(est.prevalence.values(), &theta));
        }
        worst.push((name, err, 1e-3));
    }

    for (method, tol) in [(Method::Ed, 1e-3), (Method::Hdx, 1e-3), (Method::Readme, 1e-2)] {
        let mut err = 0.0f64;
        for trial in 0..trials {
            let means = [vec![0.0, 0.0, 0.0, 0.0], vec![1.5, 0.0, 0.8, -0.5], vec![0.0, 1.5, -0.6, 0.9]];
            let train = synth_gaussian(&[40, 40, 40], &means, 1.0, trial).unwrap();
            let (rows, theta) = replicate(train.labels(), &random_reps(3, &mut rng));
            let test = train.features().select(Axis(0), &rows);
            let est = quantify(&QuantifierSpec::new(method, 3), &train, &test, trial).unwrap();
            err = err.max(l1(est.prevalence.values(), &theta));
        }
        worst.push((method.id(), err, tol));
    }

    let passed = worst.iter().all(|&(_, e, tol)| e <= tol);
    let detail = worst.iter().map(|(n, e, _)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(passed, format!("max L1 over {trials} trials: {detail}"))
}

// Normal quantile of 0.9: unit-variance classes at ±Z90 give tpr 0.9, fpr 0.1.
const Z90: f64 = 1.281_551_565_544_600_5;

fn classify_and_count_bias() -> Outcome {
    let draws = 200u64;
    let spec = ScenarioSpec::new(vec![0.5, 0.5], vec![0.1, 0.9], 0.5, 0).unwrap();
    let mut sums = [0.0; 3];
    for draw in 0..draws {
        let data = synth_gaussian(&[1000, 1000], &[vec![Z90], vec![-Z90]], 1.0, 1000 + draw).unwrap();
        let spec = spec.with_seed(draw);
        let split = draw_split(&data, &spec).unwrap();
        let train = data.subset(&split.train_indices).unwrap();
        let test = data.subset(&split.test_indices).unwrap();
        let ctx = DrawContext::new(&train, test.features(), Default::default(), 10, draw).unwrap();
        for (sum, method) in sums.iter_mut().zip([Method::Cc, Method::Acc, Method::Ms]) {
            *sum += ctx.quantify(&QuantifierSpec::new(method, 2)).unwrap().prevalence.get(0);
        }
    }
    let [cc, acc, ms] = sums.map(|s| s / draws as f64);
    let passed = (cc - 0.18).abs() <= 0.02 && (acc - 0.1).abs() <= 0.03 && (ms - 0.1).abs() <= 0.03;
    outcome(passed, format!("mean over {draws} draws: cc {cc:.4} (0.18±0.02), ac {acc:.4}, ms {ms:.4} (0.10±0.03)"))
}

fn random_simplex(l: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..l).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut max_nkld = 0.0f64;
    for i in 0..10_000 {
        let l = rng.random_range(2..=6);
        let (p, q) = if i % 10 == 0 {
            // Point masses, disjoint every other time.
            let a = rng.random_range(0..l);
            let b = if i % 20 == 0 { (a + 1) % l } else { a };
            let mass = |k: usize| (0..l).map(|j| f64::from(u8::from(j == k))).collect::<Vec<_>>();
            (mass(a), mass(b))
        } else {
            (random_simplex(l, &mut rng), random_simplex(l, &mut rng))
        };
        let e = ae(&p, &q).unwrap();
        let n = nkld(&p, &q, NKLD_EPSILON).unwrap();
        max_nkld = max_nkld.max(n);
        let disjoint = p.iter().zip(&q).all(|(a, b)| a * b == 0.0) && p.contains(&1.0) && q.contains(&1.0);
        let ok = (0.0..=2.0).contains(&e)
            && (!disjoint || e == 2.0)
            && (0.0..1.0).contains(&n)
            && nkld(&p, &p, NKLD_EPSILON).unwrap() == 0.0
            && ae(&p, &p).unwrap() == 0.0;
        violations += usize::from(!ok);
    }
    outcome(violations == 0, format!("10000 pairs, {violations} violations, max nkld {max_nkld:.9}"))
}

fn em_fixed_point() -> Outcome {
    let prior = [0.35, 0.45, 0.2];
    let test = Array2::from_shape_fn((500, 3), |(_, j)| prior[j]);
    let state = em_quantify(&prior, &test, 1e-6, 1000).unwrap();
    let passed = state.estimate.values() == prior && state.iteration == 0 && state.converged;
    outcome(passed, format!("estimate {:?} after {} updates", state.estimate.values(), state.iteration))
}

/// `(n_class0, n_class1, mean0, mean1, dims, seed)` per dataset.
type SynthSpec = (usize, usize, f64, f64, usize, u64);

fn synthetic_run_toml(
    out: &Path,
    methods: &str,
    seeds: Option<&[u64]>,
    workers: usize,
    datasets: &[SynthSpec],
) -> String {
    let mut text = format!(
        "output_dir = \"{}\"\ngrid = \"binary\"\nworkers = {workers}\nrecord_wall_time = false\nmethods = {methods}\n",
        out.display()
    );
    if let Some(seeds) = seeds {
        text.push_str(&format!("seeds = {seeds:?}\n"));
    }
    for (i, &(n0, n1, m0, m1, dims, seed)) in datasets.iter().enumerate() {
        let mean = |m: f64| {
            format!("[{}]", (0..dims).map(|d| format!("{:.3}", m / (1.0 + d as f64))).collect::<Vec<_>>().join(", "))
        };
        text.push_str(&format!(
            "[[datasets]]\nkind = \"synthetic\"\nname = \"synthetic{i}\"\nn_per_class = [{n0}, {n1}]\nmeans = [{}, {}]\nstddev = 1.0\nseed = {seed}\n",
            mean(m0),
            mean(m1)
        ));
    }
    text
}

fn run_determinism() -> Outcome {
    let ids: Vec<String> = Method::ALL.iter().map(|m| format!("\"{}\"", m.id())).collect();
    let methods = format!("[{}]", ids.join(", "));
    let dataset = [(300, 200, 0.0, 1.5, 3, 21)];
    let mut files = Vec::new();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, workers) in dirs.iter().zip([1, 4]) {
        let config =
            RunConfig::parse(&synthetic_run_toml(dir.path(), &methods, Some(&[0]), workers, &dataset), dir.path())
                .unwrap();
        run(&config).unwrap();
        files.push(std::fs::read(dir.path().join(RESULTS_FILE)).unwrap());
    }
    let rows = files[0].iter().filter(|&&b| b == b'\n').count() - 1;
    outcome(files[0] == files[1], format!("workers 1 vs 4, {rows} rows, {} bytes each", files[0].len()))
}

fn desk_scale_direction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let datasets = [
        (400, 400, 0.0, 1.5, 2, 31),
        (600, 300, 0.0, 1.2, 3, 32),
        (300, 500, 0.0, 1.0, 1, 33),
        (500, 500, 0.0, 2.0, 4, 34),
        (450, 350, 0.0, 2.5, 2, 35),
    ];
    let text = synthetic_run_toml(dir.path(), r#"["cc", "pcc", "ms", "dys"]"#, Some(&[0, 1, 2]), 8, &datasets);
    let config = RunConfig::parse(&text, dir.path()).unwrap();
    run(&config).unwrap();
    let records = read_results(&dir.path().join(RESULTS_FILE)).unwrap();
    let agg = aggregate(&records, Metric::Ae, Filter { shift: Some(ShiftCategory::Major), split: None }).unwrap();
    let rank = |m: &str| agg.report.average_rank(m).unwrap();
    let ordered = ["ms", "dys"].iter().all(|&good| ["cc", "pcc"].iter().all(|&bad| rank(good) < rank(bad)));
    let friedman = agg.report.friedman.as_ref().unwrap();
    let passed = ordered && friedman.rejected && agg.report.datasets.len() == 5;
    outcome(
        passed,
        format!(
            "avg ranks ms {:.2} dys {:.2} cc {:.2} pcc {:.2}; friedman {:.2} (critical {:.2}, rejected {})",
            rank("ms"),
            rank("dys"),
            rank("cc"),
            rank("pcc"),
            friedman.statistic,
            friedman.critical_value,
            friedman.rejected
        ),
    )
}

fn gradient_check() -> Outcome {
    let x = Array2::from_shape_vec(
        (5, 3),
        vec![0.5, -1.2, 0.3, 1.1, 0.4, -0.7, -0.3, 0.9, 1.5, 0.8, -0.5, -1.1, -1.4, 0.2, 0.6],
    )
    .unwrap();
    let labels = [0, 1, 2, 1, 0];
    let params: Vec<f64> = (0..12).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect();
    let (_, grad) = logistic_objective(&x, &labels, 3, 1.0, &params).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let mut up = params.clone();
        let mut down = params.clone();
        up[i] += h;
        down[i] -= h;
        let fd = (logistic_objective(&x, &labels, 3, 1.0, &up).unwrap().0
            - logistic_objective(&x, &labels, 3, 1.0, &down).unwrap().0)
            / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8));
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over 12 weights"))
}
