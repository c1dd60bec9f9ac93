//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by any stage of the pipeline. Messages carry enough
/// context (line numbers, metric names, stage) to be actionable from the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (datasets, prediction files): wrong field count,
    /// unparseable numbers, and similar.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A link connecting a node to itself, rejected at parse time.
    #[error("self-interaction rejected at line {line}: node {node:?} linked to itself")]
    SelfLoop { line: usize, node: String },

    /// Input contained no links at all.
    #[error("empty stream: input contains no links")]
    EmptyStream,

    /// An interval with start >= end, or non-finite bounds.
    #[error("invalid interval [{start}, {end}]: start must be strictly less than end and both finite")]
    InvalidInterval { start: f64, end: f64 },

    /// Invalid configuration: bad metric list, bad schedule, bad learner
    /// parameters, bad CLI arguments forwarded from a config file.
    #[error("configuration error: {0}")]
    Config(String),

    /// Every entry of a prediction index is zero so proportional allocation
    /// is undefined.
    #[error("degenerate prediction index: all index values are zero, cannot allocate a positive budget")]
    DegenerateIndex,

    /// A negative value where only non-negative ones are meaningful
    /// (predicted counts, weights, budgets).
    #[error("negative value for {what}: {value}")]
    Negative { what: &'static str, value: f64 },

    /// Score tables passed together do not cover the same pair set.
    #[error("mismatched pair sets: {0}")]
    PairSetMismatch(String),

    /// Evaluation requested but the prediction window holds no links.
    #[error("missing ground truth: the prediction window contains no links (use predict-only mode if this is expected)")]
    MissingGroundTruth,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
