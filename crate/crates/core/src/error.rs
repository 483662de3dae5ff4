use std::path::PathBuf;

/// Errors raised anywhere in the quantification pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing target column `{0}`")]
    MissingTargetColumn(String),

    #[error("non-numeric value `{value}` in continuous column `{column}` (row {row})")]
    NonNumeric { column: String, row: usize, value: String },

    #[error("dataset is empty{0}")]
    EmptyDataset(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("class {0} has no training instances")]
    MissingClass(usize),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("degenerate denominator: tpr equals fpr")]
    DegenerateDenominator,

    #[error("method `{method}` does not support {detail}")]
    Unsupported { method: &'static str, detail: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("no critical value tabulated for k={k} at alpha={alpha}")]
    OutsideTable { k: usize, alpha: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// A shared intermediate result failed earlier with this message.
    #[error("{0}")]
    Upstream(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
