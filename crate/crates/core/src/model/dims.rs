use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Model sizes. The embedding size and the model/encoding size are one
/// number here (`d`), as they are in the architecture this mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d: usize,
    pub heads: usize,
    pub kv: usize,
    pub layers: usize,
    pub ff: usize,
    pub vocab: usize,
    pub max_len: usize,
}

impl ModelDims {
    pub fn new(
        d: usize,
        heads: usize,
        kv: usize,
        layers: usize,
        ff: usize,
        vocab: usize,
        max_len: usize,
    ) -> Result<Self> {
        if d != heads * kv {
            return Err(Error::Config(format!(
                "d ({d}) must equal heads * kv ({heads} * {kv})"
            )));
        }
        if d == 0 || layers == 0 || ff == 0 || vocab == 0 || max_len == 0 {
            return Err(Error::Config("all model dims must be positive".into()));
        }
        Ok(ModelDims { d, heads, kv, layers, ff, vocab, max_len })
    }

    /// Embedding size; equal to the model size by construction.
    pub fn e(&self) -> usize {
        self.d
    }

    /// CPU-friendly defaults used by the toy runs.
    pub fn toy(vocab: usize, max_len: usize) -> Self {
        ModelDims { d: 64, heads: 4, kv: 16, layers: 2, ff: 256, vocab, max_len }
    }

    /// Gradient-check scale: one layer, tiny widths.
    pub fn micro(vocab: usize, max_len: usize) -> Self {
        ModelDims { d: 8, heads: 2, kv: 4, layers: 1, ff: 16, vocab, max_len }
    }
}
