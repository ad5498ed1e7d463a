//! Laboratory for studying entity-type abstraction in small encoder-decoder
//! transformers.
//!
//! The crate contains everything needed to run a controlled comparison of
//! five abstraction-injection strategies against a plain baseline on two
//! deterministically generated logical-reasoning tasks:
//!
//! * [`numkit`] — a minimal dense f64 tensor library with reverse-mode
//!   differentiation (the only math backend used anywhere).
//! * [`vocab`] — word-level tokenizer and vocabulary, including the reserved
//!   block of numbered abstraction tags and the `<grounded>` token.
//! * [`abstraction`] — building the simplified tag sequence for an input,
//!   plus the gold taggers for both synthetic tasks.
//! * [`kinship`] — family-graph generator: chain-structured graphs, relation
//!   composition, templated rendering, and level-controlled splits.
//! * [`rules`] — fact/rule theory generator with a forward-chaining prover,
//!   proof depths and open-world True/False/Unknown labels.
//! * [`model`] — the toy encoder-decoder transformer with all six forward
//!   configurations.
//! * [`harness`] — training loop with early stopping, decoding, scoring and
//!   report generation.
//! * [`checks`] — self-contained verification suites (gradient checks,
//!   oracle equivalences, round-trips) shared by `entlab check` and the
//!   acceptance tests.

pub mod abstraction;
pub mod checks;
pub mod config;
pub mod data;
pub mod error;
pub mod harness;
pub mod kinship;
pub mod model;
pub mod numkit;
pub mod rng;
pub mod rules;
pub mod vocab;

pub use error::{Error, Result};
