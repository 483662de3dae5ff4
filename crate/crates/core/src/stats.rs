//! Rank-based comparison of methods over datasets: per-dataset midranks,
//! the Friedman test and the Nemenyi critical difference.

use std::fmt::Write as _;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// `q_alpha / sqrt(2)` of the studentized range at infinite degrees of
/// freedom, for k = 2..=30 methods.
const NEMENYI_Q_05: [f64; 29] = [
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878, 3.101730, 3.163684, 3.218654, 3.268004,
    3.312739, 3.353618, 3.391230, 3.426041, 3.458425, 3.488685, 3.517073, 3.543799, 3.569040, 3.592946, 3.615646,
    3.637252, 3.657861, 3.677556, 3.696413, 3.714498, 3.731869, 3.748578,
];
const NEMENYI_Q_10: [f64; 29] = [
    1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884, 2.854606, 2.919889, 2.977768, 3.029694,
    3.076733, 3.119693, 3.159199, 3.195743, 3.229723, 3.261461, 3.291224, 3.319233, 3.345676, 3.370712, 3.394477,
    3.417089, 3.438651, 3.459253, 3.478971, 3.497878, 3.516033, 3.533492,
];

/// Midranks of one row, ascending (rank 1 = smallest value).
fn midranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        // Positions start..end share the average of ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Ranks each dataset row of a datasets x methods error matrix.
pub fn rank_methods(errors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let width = errors.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(errors.len());
    for row in errors {
        if row.len() != width {
            return Err(Error::LengthMismatch { expected: width, got: row.len() });
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("error matrix (NaN)"));
        }
        out.push(midranks(row));
    }
    Ok(out)
}

/// Column means of a rank matrix.
pub fn average_ranks(ranks: &[Vec<f64>]) -> Vec<f64> {
    let n = ranks.len() as f64;
    let k = ranks.first().map_or(0, Vec::len);
    (0..k).map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Outcome of the Friedman test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedmanOutcome {
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub rejected: bool,
}

/// Friedman chi-square statistic
/// `12N / (k(k+1)) * (sum_j R_j^2 - k(k+1)^2 / 4)` on average ranks `R_j`,
/// compared against the chi-square quantile with `k - 1` degrees of freedom.
pub fn friedman_test(ranks: &[Vec<f64>], alpha: f64) -> Result<FriedmanOutcome> {
    let n = ranks.len();
    let k = ranks.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::InvalidArgument(format!(
            "Friedman test needs at least 2 datasets and 2 methods, got {n} x {k}"
        )));
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be in (0,1), got {alpha}")));
    }
    let avg = average_ranks(ranks);
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = avg.iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let critical_value = chi.inverse_cdf(1.0 - alpha);
    Ok(FriedmanOutcome { statistic, critical_value, alpha, rejected: statistic > critical_value })
}

/// Nemenyi critical difference `q_alpha * sqrt(k(k+1) / (6n))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &NEMENYI_Q_05
    } else if (alpha - 0.1).abs() < 1e-12 {
        &NEMENYI_Q_10
    } else {
        return Err(Error::OutsideTable { k, alpha });
    };
    if !(2..=30).contains(&k) {
        return Err(Error::OutsideTable { k, alpha });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("dataset count must be positive".into()));
    }
    let q = table[k - 2];
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt())
}

/// Maximal runs of methods, in average-rank order, whose extreme average
/// ranks differ by strictly less than `cd`. Returns method indices.
pub fn significance_groups(avg_ranks: &[f64], cd: f64) -> Result<Vec<Vec<usize>>> {
    if cd <= 0.0 || cd.is_nan() {
        return Err(Error::InvalidArgument(format!("critical difference must be positive, got {cd}")));
    }
    let mut order: Vec<usize> = (0..avg_ranks.len()).collect();
    order.sort_by(|&a, &b| avg_ranks[a].total_cmp(&avg_ranks[b]).then(a.cmp(&b)));
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for start in 0..order.len() {
        let mut end = start;
        while end + 1 < order.len() && avg_ranks[order[end + 1]] - avg_ranks[order[start]] < cd {
            end += 1;
        }
        // Intervals only grow to the right, so containment means same end.
        if groups.last().is_none_or(|&(_, e)| e < end) {
            groups.push((start, end));
        }
    }
    Ok(groups.into_iter().map(|(s, e)| order[s..=e].to_vec()).collect())
}

/// Per-dataset mean errors, their ranks, and the significance analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    /// datasets x methods
    pub mean_errors: Vec<Vec<f64>>,
    /// datasets x methods midranks
    pub ranks: Vec<Vec<f64>>,
    pub average_ranks: Vec<f64>,
    /// `None` with fewer than two datasets.
    pub friedman: Option<FriedmanOutcome>,
    /// `None` when the Nemenyi table does not cover the method count.
    pub critical_difference: Option<f64>,
    pub groups: Vec<Vec<usize>>,
}

impl RankReport {
    pub fn build(datasets: Vec<String>, methods: Vec<String>, mean_errors: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        if mean_errors.len() != datasets.len() {
            return Err(Error::LengthMismatch { expected: datasets.len(), got: mean_errors.len() });
        }
        if mean_errors.iter().any(|r| r.len() != methods.len()) {
            return Err(Error::InvalidArgument("error matrix width differs from method count".into()));
        }
        let ranks = rank_methods(&mean_errors)?;
        let average_ranks = average_ranks(&ranks);
        let friedman =
            if datasets.len() >= 2 && methods.len() >= 2 { Some(friedman_test(&ranks, alpha)?) } else { None };
        let critical_difference =
            if datasets.is_empty() { None } else { nemenyi_cd(methods.len(), datasets.len(), alpha).ok() };
        let groups = match critical_difference {
            Some(cd) => significance_groups(&average_ranks, cd)?,
            None => Vec::new(),
        };
        Ok(Self { datasets, methods, mean_errors, ranks, average_ranks, friedman, critical_difference, groups })
    }

    /// Average rank of a method by name.
    pub fn average_rank(&self, method: &str) -> Option<f64> {
        self.methods.iter().position(|m| m == method).map(|i| self.average_ranks[i])
    }

    /// CSV with one row per dataset (mean errors) plus an average-rank row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dataset");
        for m in &self.methods {
            s.push(',');
            s.push_str(m);
        }
        s.push('\n');
        for (d, row) in self.datasets.iter().zip(&self.mean_errors) {
            s.push_str(d);
            for v in row {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s.push_str("avg_rank");
        for r in &self.average_ranks {
            let _ = write!(s, ",{r:.4}");
        }
        s.push('\n');
        s
    }

    /// Markdown table of mean errors and average ranks, with the test summary.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| dataset |");
        for m in &self.methods {
            let _ = write!(s, " {m} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---:|".repeat(self.methods.len()));
        s.push('\n');
        for (d, row) in self.datasets.iter().zip(&self.mean_errors) {
            let best = row.iter().copied().fold(f64::INFINITY, f64::min);
            let _ = write!(s, "| {d} |");
            for &v in row {
                if v == best {
                    let _ = write!(s, " **{v:.3}** |");
                } else {
                    let _ = write!(s, " {v:.3} |");
                }
            }
            s.push('\n');
        }
        s.push_str("| avg. rank |");
        for r in &self.average_ranks {
            let _ = write!(s, " {r:.2} |");
        }
        s.push('\n');
        s.push('\n');
        match &self.friedman {
            Some(f) => {
                let _ = writeln!(
                    s,
                    "Friedman chi-square = {:.4} (critical {:.4} at alpha {}): {}",
                    f.statistic,
                    f.critical_value,
                    f.alpha,
                    if f.rejected { "reject equal performance" } else { "no significant difference" }
                );
            }
            None => s.push_str("Friedman test not applicable (fewer than two datasets).\n"),
        }
        if let Some(cd) = self.critical_difference {
            let _ = writeln!(s, "\nNemenyi critical difference: {cd:.4}");
        }
        s
    }

    /// Plot-ready CD-diagram data: `method,avg_rank,groups` where `groups`
    /// lists the ids of every significance group containing the method.
    pub fn cd_diagram_csv(&self) -> String {
        let mut s = String::from("method,avg_rank,groups\n");
        let mut order: Vec<usize> = (0..self.methods.len()).collect();
        order.sort_by(|&a, &b| self.average_ranks[a].total_cmp(&self.average_ranks[b]).then(a.cmp(&b)));
        for i in order {
            let ids: Vec<String> = self
                .groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.contains(&i))
                .map(|(gid, _)| gid.to_string())
                .collect();
            let _ = writeln!(s, "{},{:.4},{}", self.methods[i], self.average_ranks[i], ids.join(";"));
        }
        s
    }
}
