//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid level {value:?} for variable {column:?} in row {row}")]
    InvalidLevel {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing value for variable {column:?} in row {row}")]
    MissingValue { row: usize, column: String },

    #[error("unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("malformed model string: {0}")]
    MalformedModelString(String),

    #[error("cycle detected: {0}")]
    CycleDetected(String),

    #[error("duplicate arc {from} -> {to}")]
    DuplicateArc { from: String, to: String },

    #[error("random generation exhausted after {tries} tries: {reason}")]
    GenerationExhausted { tries: usize, reason: String },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("evidence has zero probability under the fitted network")]
    ZeroProbabilityEvidence,

    #[error("unsupported CPT configuration reached for node {node:?} (row {row})")]
    UnsupportedConfiguration { node: String, row: usize },

    #[error("no data: {0}")]
    NoData(String),

    #[error("constant trace: effective sample size is undefined")]
    ConstantTrace,

    #[error("degenerate chains: {0}")]
    DegenerateChains(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code bucket for the CLI: `2` for input/data problems, `3` for
    /// constraint or statistical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SchemaMismatch(_)
            | Error::InvalidLevel { .. }
            | Error::MissingValue { .. }
            | Error::UnknownVariable(_)
            | Error::MalformedModelString(_)
            | Error::CycleDetected(_)
            | Error::DuplicateArc { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::GenerationExhausted { .. }
            | Error::DomainError(_)
            | Error::ZeroProbabilityEvidence
            | Error::UnsupportedConfiguration { .. }
            | Error::NoData(_)
            | Error::ConstantTrace
            | Error::DegenerateChains(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
