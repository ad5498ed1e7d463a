//! Parameter registration, initialization, and checkpoint I/O.
//!
//! Registration order is the canonical checkpoint layout: token and
//! positional embeddings, encoder layers, decoder layers, final norms, the
//! LM head, then the strategy-specific extras. Baseline and strategy
//! variants therefore share a prefix, which is what makes the added-
//! parameter audit an exact integer comparison.

use super::dims::ModelDims;
use super::Strategy;
use crate::error::{Error, Result};
use crate::numkit::{ParamId, ParamStore, Tensor};
use crate::rng::Rng;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Weight init: zero-mean normal with std 1/sqrt(d). A fixed small std
/// (0.02, tuned for d in the hundreds) leaves a d=64 model too quiet to
/// train within the toy budget — it cannot even memorize 50 examples.
fn init_std(d: usize) -> f64 {
    1.0 / (d as f64).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub(super) struct AttnIds {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub(super) struct NormIds {
    pub gain: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone)]
pub(super) struct LayerIds {
    pub ln1: NormIds,
    pub attn: AttnIds,
    pub cross: Option<(NormIds, AttnIds)>,
    pub ln_ff: NormIds,
    pub ff1_w: ParamId,
    pub ff1_b: ParamId,
    pub ff2_w: ParamId,
    pub ff2_b: ParamId,
}

#[derive(Debug, Clone)]
pub(super) struct Layout {
    pub tok_emb: ParamId,
    pub pos_emb: ParamId,
    pub enc_layers: Vec<LayerIds>,
    pub enc_final: NormIds,
    pub dec_layers: Vec<LayerIds>,
    pub dec_final: NormIds,
    pub w1: Option<(ParamId, ParamId)>,
    pub w2: Option<ParamId>,
    pub w_abs: Option<ParamId>,
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub strategy: Strategy,
    pub store: ParamStore,
    pub(super) layout: Layout,
}

fn norm(store: &mut ParamStore, name: &str, width: usize) -> NormIds {
    let gain = store.register(format!("{name}.gain"), Tensor::filled(vec![width], 1.0));
    let bias = store.register(format!("{name}.bias"), Tensor::zeros(vec![width]));
    NormIds { gain, bias }
}

fn attn(store: &mut ParamStore, name: &str, d: usize, rng: &mut Rng) -> AttnIds {
    let mut mat = |suffix: &str, rng: &mut Rng| {
        store.register(format!("{name}.{suffix}"), Tensor::randn(vec![d, d], init_std(d), rng))
    };
    AttnIds {
        wq: mat("wq", rng),
        wk: mat("wk", rng),
        wv: mat("wv", rng),
        wo: mat("wo", rng),
    }
}

fn layer(store: &mut ParamStore, name: &str, dims: &ModelDims, cross: bool, rng: &mut Rng) -> LayerIds {
    let ln1 = norm(store, &format!("{name}.ln1"), dims.d);
    let self_attn = attn(store, &format!("{name}.attn"), dims.d, rng);
    let cross = cross.then(|| {
        let ln = norm(store, &format!("{name}.ln2"), dims.d);
        let at = attn(store, &format!("{name}.cross"), dims.d, rng);
        (ln, at)
    });
    let ln_ff = norm(store, &format!("{name}.ln_ff"), dims.d);
    let ff1_w = store.register(
        format!("{name}.ff1.w"),
        Tensor::randn(vec![dims.d, dims.ff], init_std(dims.d), rng),
    );
    let ff1_b = store.register(format!("{name}.ff1.b"), Tensor::zeros(vec![dims.ff]));
    let ff2_w = store.register(
        format!("{name}.ff2.w"),
        Tensor::randn(vec![dims.ff, dims.d], init_std(dims.ff), rng),
    );
    let ff2_b = store.register(format!("{name}.ff2.b"), Tensor::zeros(vec![dims.d]));
    LayerIds { ln1, attn: self_attn, cross, ln_ff, ff1_w, ff1_b, ff2_w, ff2_b }
}

impl ModelParams {
    pub fn init(dims: ModelDims, strategy: Strategy, rng: &mut Rng) -> Self {
        let mut store = ParamStore::new();
        let tok_emb =
            store.register("tok_emb", Tensor::randn(vec![dims.vocab, dims.e()], init_std(dims.e()), rng));
        let pos_emb =
            store.register("pos_emb", Tensor::randn(vec![dims.max_len, dims.e()], init_std(dims.e()), rng));
        let enc_layers: Vec<LayerIds> = (0..dims.layers)
            .map(|i| layer(&mut store, &format!("enc.{i}"), &dims, false, rng))
            .collect();
        let enc_final = norm(&mut store, "enc.final", dims.d);
        let dec_layers: Vec<LayerIds> = (0..dims.layers)
            .map(|i| layer(&mut store, &format!("dec.{i}"), &dims, true, rng))
            .collect();
        let dec_final = norm(&mut store, "dec.final", dims.d);

        let w1 = (strategy == Strategy::EmbCat).then(|| {
            let w = store.register(
                "w1",
                Tensor::randn(vec![2 * dims.e(), dims.e()], init_std(2 * dims.e()), rng),
            );
            let b = store.register("w1.bias", Tensor::zeros(vec![dims.e()]));
            (w, b)
        });
        let w2 = (strategy == Strategy::EncCat).then(|| {
            store.register("w2", Tensor::randn(vec![2 * dims.d, dims.d], init_std(2 * dims.d), rng))
        });
        // The LM head is tied to the token embedding (as in the reference
        // architecture); the auxiliary head starts as an exact copy of it
        // and then trains separately, adding d*vocab parameters.
        let w_abs = (strategy == Strategy::DecLoss).then(|| {
            let copy = store.get(tok_emb).clone();
            store.register("w_abs", copy)
        });

        let layout = Layout {
            tok_emb,
            pos_emb,
            enc_layers,
            enc_final,
            dec_layers,
            dec_final,
            w1,
            w2,
            w_abs,
        };
        ModelParams { dims, strategy, store, layout }
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.store.numel()
    }
}

/// Checkpoint: one JSON header line, then raw little-endian f64 blocks in
/// registration order. Loading rebuilds the layout from (dims, strategy)
/// and refuses a vocabulary fingerprint mismatch.
pub fn save_checkpoint(params: &ModelParams, vocab_hash: u64, path: &Path) -> Result<()> {
    let header = serde_json::json!({
        "format": "entlab-checkpoint-v1",
        "strategy": params.strategy.name(),
        "dims": params.dims,
        "vocab_hash": format!("{vocab_hash:016x}"),
        "params": params.store.iter().map(|(_, name, t)| {
            serde_json::json!({ "name": name, "shape": t.shape() })
        }).collect::<Vec<_>>(),
    });
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", serde_json::to_string(&header)?)?;
    for (_, _, t) in params.store.iter() {
        for v in t.data() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path, expect_vocab_hash: u64) -> Result<ModelParams> {
    let f = std::fs::File::open(path)?;
    let mut reader = BufReader::new(f);
    let mut header_line = String::new();
    reader.read_line(&mut header_line)?;
    let header: serde_json::Value = serde_json::from_str(&header_line)
        .map_err(|e| Error::BadCheckpoint(format!("header: {e}")))?;
    if header["format"] != "entlab-checkpoint-v1" {
        return Err(Error::BadCheckpoint("unknown format".into()));
    }
    let stored_hash = header["vocab_hash"]
        .as_str()
        .and_then(|s| u64::from_str_radix(s, 16).ok())
        .ok_or_else(|| Error::BadCheckpoint("missing vocab_hash".into()))?;
    if stored_hash != expect_vocab_hash {
        return Err(Error::VocabHashMismatch);
    }
    let strategy = Strategy::from_name(
        header["strategy"]
            .as_str()
            .ok_or_else(|| Error::BadCheckpoint("missing strategy".into()))?,
    )?;
    let dims: ModelDims = serde_json::from_value(header["dims"].clone())
        .map_err(|e| Error::BadCheckpoint(format!("dims: {e}")))?;

    // Rebuild the layout, then overwrite every tensor from the blocks.
    let mut params = ModelParams::init(dims, strategy, &mut crate::rng::seeded(0));
    let names: Vec<String> = header["params"]
        .as_array()
        .ok_or_else(|| Error::BadCheckpoint("missing params list".into()))?
        .iter()
        .map(|p| p["name"].as_str().unwrap_or_default().to_string())
        .collect();
    let expected: Vec<String> =
        params.store.iter().map(|(_, n, _)| n.to_string()).collect();
    if names != expected {
        return Err(Error::BadCheckpoint("parameter list does not match layout".into()));
    }
    for i in 0..params.store.len() {
        let t = params.store.get_mut(ParamId(i));
        let mut buf = [0u8; 8];
        for v in t.data_mut() {
            reader.read_exact(&mut buf).map_err(|_| {
                Error::BadCheckpoint("file truncated inside parameter blocks".into())
            })?;
            *v = f64::from_le_bytes(buf);
        }
    }
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::BadCheckpoint("trailing bytes after parameter blocks".into()));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn dims() -> ModelDims {
        ModelDims::micro(16, 12)
    }

    #[test]
    fn added_parameter_counts_match_the_formulas() {
        let base = ModelParams::init(dims(), Strategy::Baseline, &mut seeded(0)).param_count();
        let d = dims().d;
        let e = dims().e();
        let v = dims().vocab;
        let emb_cat = ModelParams::init(dims(), Strategy::EmbCat, &mut seeded(0)).param_count();
        assert_eq!(emb_cat - base, 2 * e * e + e);
        let enc_cat = ModelParams::init(dims(), Strategy::EncCat, &mut seeded(0)).param_count();
        assert_eq!(enc_cat - base, 2 * d * d);
        let dec_loss = ModelParams::init(dims(), Strategy::DecLoss, &mut seeded(0)).param_count();
        assert_eq!(dec_loss - base, d * v);
        for s in [Strategy::EmbSum, Strategy::EncSum] {
            assert_eq!(ModelParams::init(dims(), s, &mut seeded(0)).param_count(), base);
        }
    }

    #[test]
    fn aux_head_starts_equal_to_tied_lm_head() {
        let p = ModelParams::init(dims(), Strategy::DecLoss, &mut seeded(3));
        let tied = p.store.get(p.layout.tok_emb);
        let w_abs = p.store.get(p.layout.w_abs.unwrap());
        assert_eq!(tied.data(), w_abs.data());
    }

    #[test]
    fn checkpoint_round_trip_and_vocab_hash_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let params = ModelParams::init(dims(), Strategy::EncSum, &mut seeded(7));
        save_checkpoint(&params, 0xabcd, &path).unwrap();
        let loaded = load_checkpoint(&path, 0xabcd).unwrap();
        assert_eq!(loaded.strategy, Strategy::EncSum);
        assert_eq!(loaded.param_count(), params.param_count());
        for (id, _, t) in params.store.iter() {
            assert_eq!(t.data(), loaded.store.get(id).data());
        }
        assert!(matches!(
            load_checkpoint(&path, 0x1234),
            Err(Error::VocabHashMismatch)
        ));
    }
}
