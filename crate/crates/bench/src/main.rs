use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use quantification::sampling::{binary_grid, multiclass_grid};
use quantification::ShiftCategory;
use quantification_bench::record::format_dist;
use quantification_bench::{aggregate, read_results, run, write_report, BenchError, Filter, Metric, RunConfig};

#[derive(Parser)]
#[command(name = "qbench", version, about = "Quantification benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Ae,
    Nkld,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShiftArg {
    Minor,
    Medium,
    Major,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Binary,
    Multiclass,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method on every draw.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rank methods by mean error and print the table.
    Aggregate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricArg,
        #[arg(long, value_enum)]
        shift: Option<ShiftArg>,
        /// Training fraction of the split, e.g. 0.1.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Write markdown tables, ranking CSVs and CD-diagram data.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a scenario grid.
    Grid {
        #[arg(long, value_enum)]
        kind: GridArg,
        /// Class count of the multiclass grid (3, 4 or 5).
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long)]
        print: bool,
    },
    /// Regenerate oracle fixtures.
    Fixtures {
        #[arg(long)]
        regen: bool,
        #[arg(long, default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))]
        dir: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<i32, BenchError> {
    match cli.command {
        Command::Run { config } => {
            let config = RunConfig::from_path(&config)?;
            let summary = run(&config)?;
            if summary.resumed_from > 0 {
                eprintln!("resumed after {} of {} units", summary.resumed_from, summary.units);
            }
            eprintln!(
                "{} units, {} rows ({} skipped, {} failed) -> {}",
                summary.units,
                summary.rows,
                summary.skipped,
                summary.failed,
                summary.results.display()
            );
            Ok(summary.exit_code())
        }
        Command::Aggregate { results, metric, shift, split } => {
            let metric = match metric {
                MetricArg::Ae => Metric::Ae,
                MetricArg::Nkld => Metric::Nkld,
            };
            let shift = shift.map(|s| match s {
                ShiftArg::Minor => ShiftCategory::Minor,
                ShiftArg::Medium => ShiftCategory::Medium,
                ShiftArg::Major => ShiftCategory::Major,
            });
            let records = read_results(&results)?;
            let agg = aggregate(&records, metric, Filter { shift, split })?;
            for d in &agg.dropped {
                eprintln!("warning: dataset `{d}` dropped: some method has no result under this filter");
            }
            print!("{}", agg.report.to_markdown());
            Ok(0)
        }
        Command::Report { results, out } => {
            let records = read_results(&results)?;
            for name in write_report(&records, &out)? {
                println!("{}", out.join(name).display());
            }
            Ok(0)
        }
        Command::Grid { kind, classes, print } => {
            let specs = match kind {
                GridArg::Binary => binary_grid(0),
                GridArg::Multiclass => multiclass_grid(classes, 0).map_err(|e| BenchError::Config(e.to_string()))?,
            };
            if print {
                println!("train_dist,test_dist,train_fraction");
                for s in &specs {
                    println!("{},{},{}", format_dist(&s.train_dist), format_dist(&s.test_dist), s.train_fraction);
                }
            } else {
                println!("{} scenarios", specs.len());
            }
            Ok(0)
        }
        Command::Fixtures { regen, dir } => {
            if !regen {
                return Err(BenchError::Config("nothing to do; pass --regen".into()));
            }
            for name in quantification_bench::fixtures::regenerate(&dir)? {
                println!("{}", dir.join(name).display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
