//! Benchmark harness for the `quantification` crate: run configuration,
//! seeded runs over scenario grids, result files, and rank reports.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod record;
pub mod runner;

pub use aggregate::{aggregate, write_report, Aggregate, Filter, Metric};
pub use config::RunConfig;
pub use error::BenchError;
pub use record::{read_results, ResultRecord, Status};
pub use runner::{run, RunSummary};
