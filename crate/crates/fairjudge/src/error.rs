//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading data, scoring, or reporting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}:{line}: malformed row: {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: missing column `{column}` in header")]
    MissingColumn { path: String, column: String },

    #[error("{path}: no data rows")]
    EmptyInput { path: String },

    #[error("invalid raw score range: min {min} must be strictly below max {max}")]
    InvalidRange { min: f64, max: f64 },

    #[error("raw score {raw} outside declared range [{min}, {max}]")]
    RawScoreOutOfRange { raw: f64, min: f64, max: f64 },

    #[error("rescaled score {score} outside [-1, 1]")]
    ScoreOutOfRange { score: f64 },

    #[error("{side} `{id}` has no edges")]
    ZeroDegreeEntity { side: &'static str, id: String },

    #[error("{path}:{line}: unknown label `{token}` (expected `fair` or `unfair`)")]
    UnknownLabel {
        path: String,
        line: u64,
        token: String,
    },

    #[error("conflicting labels for user `{id}`")]
    ConflictingLabel { id: String },

    #[error("labels reference users absent from the graph: {}", ids.join(", "))]
    UnresolvedLabelIds { ids: Vec<String> },

    #[error("{path}:{line}: unknown side `{token}` (expected `user` or `product`)")]
    UnknownSide {
        path: String,
        line: u64,
        token: String,
    },

    #[error("normality {value} for `{id}` outside [0, 1]")]
    NormalityOutOfRange { id: String, value: f64 },

    #[error("histogram bin counts differ: entity has {entity}, global has {global}")]
    BinCountMismatch { entity: usize, global: usize },

    #[error("global histogram is empty")]
    EmptyGlobalHistogram,

    #[error("smoothing must be positive, got {value}")]
    InvalidSmoothing { value: f64 },

    #[error("hyperparameters must be non-negative: {label}")]
    NegativeHyperParam { label: String },

    #[error("epsilon {value} outside valid range ({low}, {high})")]
    InvalidEpsilon { value: f64, low: f64, high: f64 },

    #[error("score state shapes differ: {what}")]
    ShapeMismatch { what: String },

    #[error(
        "run with parameters {combo} failed to converge after {iterations} iterations \
         (last error {last_error}); this indicates a solver bug"
    )]
    EnsembleNonConvergence {
        combo: String,
        iterations: usize,
        last_error: f64,
    },

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("score for `{id}` is not finite")]
    NonFiniteScore { id: String },

    #[error("no positive-class users among the scored, labeled users")]
    NoPositives,

    #[error("need at least one positive and one negative labeled user")]
    SingleClass,

    #[error("selector produced an empty user set for `{which}`")]
    EmptySelection { which: &'static str },

    #[error("top-{k} fair and unfair sets overlap ({users} users total)")]
    SelectorOverlap { k: usize, users: usize },

    #[error("bins must be >= 1")]
    InvalidBins,

    #[error("rank report size k must be >= 1")]
    InvalidK,

    #[error("infeasible synthetic configuration: {reason}")]
    InfeasibleConfig { reason: String },

    #[error("attack target product `{id}` not present in the graph")]
    MissingTarget { id: String },

    #[error("shill id `{id}` collides with an existing entity")]
    ShillIdCollision { id: String },
}
