use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can report.
///
/// The `Display` form of each variant starts with the variant name so that
/// command-line users (and scripts grepping stderr) see a stable tag.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Validation: {0}")]
    Validation(String),

    #[error("FileMissing: {}", .0.display())]
    FileMissing(PathBuf),

    #[error("FormatError: {path}: {location}: {message}")]
    Format {
        path: String,
        location: String,
        message: String,
    },

    #[error("DimMismatch: found {found}, expected {expected}")]
    DimMismatch { found: usize, expected: usize },

    #[error("NonFiniteValue: row {row}, col {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),

    #[error("SchemaError: {0}")]
    Schema(String),

    #[error("CrossFileDimMismatch: {path} has dim {found}, expected {expected}")]
    CrossFileDimMismatch {
        path: String,
        found: usize,
        expected: usize,
    },

    #[error("NoSharedIdentities: the two views have no label in common")]
    NoSharedIdentities,

    #[error("SingleIdentity: view `{0}` has fewer than two distinct labels")]
    SingleIdentity(String),

    #[error("EmptyInput: {0}")]
    EmptyInput(&'static str),

    #[error("NotPositiveDefinite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("EigenFailure: symmetric eigen-decomposition did not converge")]
    EigenFailure,

    #[error("AlreadyNormalized: score matrix is already normalized ({0})")]
    AlreadyNormalized(&'static str),

    #[error("TooFewIdentities: {found} identities, need at least {needed}")]
    TooFewIdentities { found: usize, needed: usize },

    #[error("ProbeLabelAbsent: probe label `{0}` does not occur in the gallery")]
    ProbeLabelAbsent(String),

    #[error("RankOutOfRange: max rank {max_rank} not in 1..={gallery}")]
    RankOutOfRange { max_rank: usize, gallery: usize },

    #[error("BadParams: {0}")]
    BadParams(String),

    #[error("ConfigError: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
