//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: missing or invalid field `{field}`")]
    Schema {
        path: String,
        line: usize,
        field: String,
    },

    #[error(
        "duplicate observation for {key} at anchor {anchor}, seeds ({outer},{inner}): \
         {first} vs {second}"
    )]
    DuplicateObservation {
        key: String,
        anchor: u64,
        outer: u32,
        inner: u32,
        first: f64,
        second: f64,
    },

    #[error("curve has no usable observations")]
    EmptyCurve,

    #[error("curve group mismatch: {0}")]
    MismatchedGroup(String),

    #[error("paired test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),

    #[error("curve too short: need at least {need} anchors, got {got}")]
    TooShortCurve { need: usize, got: usize },

    #[error("paired repeat matrix unavailable (aggregate with the complete-case policy)")]
    PairingUnavailable,

    #[error("anchor ordering violated: {0}")]
    AnchorOrder(String),

    #[error("candidates do not share an anchor schedule: {0}")]
    ScheduleMismatch(String),

    #[error("no candidates supplied")]
    EmptyCandidates,

    #[error("incomplete learner group; missing cells: {0}")]
    IncompleteGroup(String),

    #[error("report/fit key mismatch: {0}")]
    KeyMismatch(String),

    #[error("need more points than parameters: got {got} points for 4 parameters")]
    InsufficientPoints { got: usize },

    #[error("model domain error: {0}")]
    Domain(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
