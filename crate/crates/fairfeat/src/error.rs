//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset handling, learners, metrics, and score
/// estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A model spec and task (or metric and task) cannot be combined.
    #[error("incompatible configuration: {0}")]
    Incompatible(String),

    /// A schema, model, or report document could not be parsed.
    #[error("invalid {kind} document: {reason}")]
    Document { kind: &'static str, reason: String },

    /// Feature index outside `0..n_features`.
    #[error("feature index {index} out of range for {n_features} features")]
    FeatureIndex { index: usize, n_features: usize },

    /// File could not be read or written.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A configured column is absent from the input file.
    #[error("column {column:?} configured as {role} not found in header")]
    MissingColumn { column: String, role: &'static str },

    /// A cell could not be interpreted for its column role.
    #[error("row {row}, column {column:?}: {reason}")]
    BadCell {
        row: usize,
        column: String,
        reason: String,
    },

    /// Rows contained missing values and `drop_missing` was not enabled.
    #[error("{count} row(s) contain missing values (set drop_missing to discard them)")]
    MissingValues { count: usize },

    /// Fewer than two groups observed where a bias metric needs them.
    #[error("fewer than 2 groups present ({present} observed)")]
    GroupCount { present: usize },

    /// Train/test split could not satisfy the group constraint.
    #[error("split failed: {0}")]
    SplitFailed(String),

    /// Matrix shape does not match what a fitted model expects.
    #[error("shape mismatch: expected {expected} columns, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// Vector length disagreement between paired inputs.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Every minipatch was skipped; the ensemble carries no information.
    #[error("minipatch ensemble degenerate: {0}")]
    EnsembleDegenerate(String),

    /// A score has an empty estimator (no patch excludes the feature).
    #[error("score undefined for feature {feature}: {reason}")]
    ScoreUndefined { feature: String, reason: String },
}

impl Error {
    /// Process exit code for the CLI contract: 2 config, 3 data, 4 compute.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Incompatible(_)
            | Error::Document { .. }
            | Error::FeatureIndex { .. } => 2,
            Error::Io { .. }
            | Error::MissingColumn { .. }
            | Error::BadCell { .. }
            | Error::MissingValues { .. }
            | Error::GroupCount { .. }
            | Error::SplitFailed(_)
            | Error::ShapeMismatch { .. }
            | Error::LengthMismatch { .. } => 3,
            Error::EnsembleDegenerate(_) | Error::ScoreUndefined { .. } => 4,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
