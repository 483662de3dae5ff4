//! Golden fixtures produced by the brute-force oracles.
//!
//! `qbench fixtures --regen` rewrites them; the test suite checks that the
//! committed files match a fresh regeneration and that the production
//! solvers agree with them.

use std::path::Path;

use quantification::distance::{hellinger, Distance};
use quantification::oracle::{oracle_cc_expectation, oracle_simplex_grid_minimize};

use crate::error::{BenchError, Result};
use crate::record::format_dist;

pub const CC_EXPECTATION: &str = "cc_expectation.csv";
pub const TOPSOE_LATTICE: &str = "topsoe_lattice.csv";
pub const MIXTURE_LATTICE: &str = "mixture_lattice.csv";

/// Resolution of every lattice fixture.
pub const RESOLUTION: usize = 200;

/// Binary histogram fixtures: positive, negative, test.
pub const TOPSOE_CASES: [([f64; 2], [f64; 2], [f64; 2]); 3] = [
    ([0.8, 0.2], [0.2, 0.8], [0.35, 0.65]),
    ([0.9, 0.1], [0.3, 0.7], [0.6, 0.4]),
    ([0.6, 0.4], [0.1, 0.9], [0.5, 0.5]),
];

/// Three-class histogram fixtures: class-conditional histograms and the
/// mixing weights of the test histogram.
pub fn mixture_cases() -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    vec![
        (vec![vec![0.6, 0.2, 0.1, 0.1], vec![0.1, 0.5, 0.3, 0.1], vec![0.1, 0.1, 0.2, 0.6]], vec![0.2, 0.5, 0.3]),
        (vec![vec![0.7, 0.1, 0.1, 0.1], vec![0.2, 0.6, 0.1, 0.1], vec![0.25, 0.25, 0.25, 0.25]], vec![0.65, 0.1, 0.25]),
        (vec![vec![0.4, 0.4, 0.1, 0.1], vec![0.1, 0.1, 0.4, 0.4], vec![0.1, 0.4, 0.4, 0.1]], vec![0.35, 0.35, 0.3]),
    ]
}

pub fn mix(classes: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    (0..classes[0].len()).map(|b| classes.iter().zip(theta).map(|(c, t)| c[b] * t).sum()).collect()
}

fn oracle_err(e: quantification::Error) -> BenchError {
    BenchError::Data(e.to_string())
}

fn cc_expectation() -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p", "tpr", "fpr", "expected"])?;
    for p in [0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
        for (tpr, fpr) in [(0.8, 0.2), (0.9, 0.1), (0.7, 0.4), (0.5, 0.5)] {
            let e = oracle_cc_expectation(p, tpr, fpr);
            w.write_record([p.to_string(), tpr.to_string(), fpr.to_string(), e.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| BenchError::Data(e.to_string()))
}

fn topsoe_lattice() -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["positive", "negative", "test", "resolution", "oracle_weight"])?;
    for (pos, neg, test) in TOPSOE_CASES {
        let objective = |t: &[f64]| {
            let m: Vec<f64> = (0..2).map(|b| t[0] * pos[b] + t[1] * neg[b]).collect();
            Distance::Topsoe.eval(&m, &test)
        };
        let best = oracle_simplex_grid_minimize(objective, 2, RESOLUTION).map_err(oracle_err)?;
        w.write_record([
            format_dist(&pos),
            format_dist(&neg),
            format_dist(&test),
            RESOLUTION.to_string(),
            best[0].to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| BenchError::Data(e.to_string()))
}

fn mixture_lattice() -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["objective", "classes", "test", "resolution", "oracle_theta"])?;
    for (classes, theta) in mixture_cases() {
        let test = mix(&classes, &theta);
        let joined = classes.iter().map(|c| format_dist(c)).collect::<Vec<_>>().join("|");
        let sq = |t: &[f64]| mix(&classes, t).iter().zip(&test).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let hd = |t: &[f64]| hellinger(&mix(&classes, t), &test).unwrap_or(f64::INFINITY);
        for (name, best) in [
            ("squared_l2", oracle_simplex_grid_minimize(sq, 3, RESOLUTION).map_err(oracle_err)?),
            ("hellinger", oracle_simplex_grid_minimize(hd, 3, RESOLUTION).map_err(oracle_err)?),
        ] {
            w.write_record([
                name.to_string(),
                joined.clone(),
                format_dist(&test),
                RESOLUTION.to_string(),
                format_dist(&best),
            ])?;
        }
    }
    w.into_inner().map_err(|e| BenchError::Data(e.to_string()))
}

/// File name and content of every fixture.
pub fn generate() -> Result<Vec<(&'static str, Vec<u8>)>> {
    Ok(vec![
        (CC_EXPECTATION, cc_expectation()?),
        (TOPSOE_LATTICE, topsoe_lattice()?),
        (MIXTURE_LATTICE, mixture_lattice()?),
    ])
}

/// Regenerates every fixture into `dir`.
pub fn regenerate(dir: &Path) -> Result<Vec<&'static str>> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut names = Vec::new();
    for (name, body) in generate()? {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| BenchError::io(&path, e))?;
        names.push(name);
    }
    Ok(names)
}
