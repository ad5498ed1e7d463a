//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("cross entropy over an empty (all-pad) target set")]
    EmptyLossSet,

    #[error("tag capacity exceeded: {found} distinct {type_name} entities but n = {n}")]
    TagCapacity {
        type_name: String,
        found: usize,
        n: usize,
    },

    #[error("malformed tag record `{record}`: {reason}")]
    MalformedTagRecord { record: String, reason: String },

    #[error("span {start}..{end} out of range for sequence of length {len}")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("graph level {0} below the minimum of 2")]
    LevelTooLow(usize),

    #[error("name pool exhausted: need {need} names, pool has {have}")]
    NamePoolExhausted { need: usize, have: usize },

    #[error("relation composition undefined along the requested path")]
    UndefinedComposition,

    #[error("no path between query entities")]
    NoPath,

    #[error("sampling budget exhausted after {attempts} attempts ({context})")]
    SamplingBudget { attempts: usize, context: String },

    #[error("infeasible split constraint: {0}")]
    InfeasibleSplit(String),

    #[error("vocabulary hash mismatch: checkpoint was built for a different vocabulary")]
    VocabHashMismatch,

    #[error("training diverged: non-finite loss at epoch {epoch}, step {step}")]
    DivergedLoss { epoch: usize, step: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),

    #[error("sequence length {len} exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
