//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{column}` in {path}")]
    MissingColumn { column: String, path: String },

    #[error("dates not strictly increasing in {ticker} at {date}")]
    NonMonotoneDates { ticker: String, date: String },

    #[error("empty file: {path}")]
    EmptyFile { path: String },

    #[error("series too short: need {needed}, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("calendar intersection is empty")]
    EmptyIntersection,

    #[error("singular regression matrix")]
    SingularRegression,

    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("bad EMA spans: fast {fast} must be < slow {slow}")]
    BadSpans { fast: usize, slow: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("samples must arrive date-sorted")]
    NotChronological,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("degenerate variance (below 1e-12)")]
    DegenerateVariance,

    #[error("non-finite value in {context}")]
    NonFiniteValue { context: String },

    #[error("non-finite gradient in {context}")]
    NonFiniteGradient { context: String },

    #[error("empty {split} split")]
    EmptySplit { split: String },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("empty subperiod slice")]
    EmptySlice,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
