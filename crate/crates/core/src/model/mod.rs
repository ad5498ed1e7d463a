//! Toy encoder-decoder transformer with six forward configurations.
//!
//! The strategies differ only in where the simplified sequence enters:
//! nowhere (baseline), summed or concatenated at the embedding, summed or
//! concatenated after a second encoder pass, or as the target of an
//! auxiliary decoder head whose loss is averaged with the main one.

mod dims;
mod generate;
mod params;
mod transformer;

pub use dims::ModelDims;
pub use generate::{generate, nucleus_set, sample_index, DecodeMode};
pub use params::{load_checkpoint, save_checkpoint, ModelParams};
pub use transformer::{decode_last_logits, encode_memory, forward_loss, Dropout, LossParts};

use crate::error::{Error, Result};

/// Abstraction-injection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Baseline,
    EmbSum,
    EmbCat,
    EncSum,
    EncCat,
    DecLoss,
}

pub const ALL_STRATEGIES: [Strategy; 6] = [
    Strategy::Baseline,
    Strategy::EmbSum,
    Strategy::EmbCat,
    Strategy::EncSum,
    Strategy::EncCat,
    Strategy::DecLoss,
];

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::EmbSum => "emb-sum",
            Strategy::EmbCat => "emb-cat",
            Strategy::EncSum => "enc-sum",
            Strategy::EncCat => "enc-cat",
            Strategy::DecLoss => "dec-loss",
        }
    }

    pub fn from_name(s: &str) -> Result<Strategy> {
        ALL_STRATEGIES
            .iter()
            .copied()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }

    /// Strategies that run the encoder twice, once per sequence.
    pub fn encodes_simplified(self) -> bool {
        matches!(self, Strategy::EncSum | Strategy::EncCat)
    }
}
