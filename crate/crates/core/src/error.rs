use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid metadata: {0}")]
    Metadata(String),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: unknown category `{label}`")]
    UnknownCategory {
        row: usize,
        column: String,
        label: String,
    },

    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("privacy budget exhausted: requested ε={requested_epsilon}, δ={requested_delta}; remaining ε={remaining_epsilon}, δ={remaining_delta}")]
    BudgetExhausted {
        requested_epsilon: f64,
        requested_delta: f64,
        remaining_epsilon: f64,
        remaining_delta: f64,
    },

    #[error("column `{0}` is not categorical; histogram queries need a categorical column")]
    NotCategorical(String),

    #[error("column `{0}` is not continuous")]
    NotContinuous(String),

    #[error("dataset has no target column")]
    NoTarget,

    #[error("training diverged at step {step}: non-finite loss")]
    Divergence { step: usize },

    #[error("target ε={target} unreachable for σ in [{sigma_low}, {sigma_high}]: achieved ε={epsilon_at_low} at σ={sigma_low}, ε={epsilon_at_high} at σ={sigma_high}")]
    Unreachable {
        target: f64,
        sigma_low: f64,
        sigma_high: f64,
        epsilon_at_low: f64,
        epsilon_at_high: f64,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("pair {index} has a zero NP value; relative error is undefined")]
    ZeroBaseline { index: usize },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("mixed schema versions: {0} and {1}")]
    MixedSchema(u32, u32),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
