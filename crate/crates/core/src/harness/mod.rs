//! Training loop, decoding-based evaluation, and report generation.

pub mod eval;
pub mod report;
pub mod train;

pub use eval::{
    evaluate, extract_triple, score_kinship, score_rules, BucketRow, EvalConfig, EvalReport,
    FailureCounts,
};
pub use report::{comparison_table, render_table};
pub use train::{
    prepare, train, AdamW, EpochLog, Prepared, TrainConfig, TrainOutcome, write_train_log,
};
