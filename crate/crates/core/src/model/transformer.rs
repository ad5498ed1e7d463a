//! Forward passes for all six configurations, recorded on the numkit tape.
//!
//! Architecture: pre-norm transformer, learned absolute positional
//! embeddings, ReLU feedforward, no biases in attention projections. The
//! decoder is teacher-forced during training; the loss is token-level cross
//! entropy, averaged 50/50 with the auxiliary head's loss under `dec-loss`.

use super::params::{AttnIds, LayerIds, ModelParams, NormIds};
use super::Strategy;
use crate::abstraction::AbstractedExample;
use crate::error::{Error, Result};
use crate::numkit::{NodeId, Tape, Tensor};
use crate::rng::Rng;
use rand::Rng as _;

/// Dropout source; `None` disables it (evaluation, gradient checks).
pub struct Dropout<'r> {
    rng: Option<(&'r mut Rng, f64)>,
}

impl<'r> Dropout<'r> {
    pub fn off() -> Self {
        Dropout { rng: None }
    }

    pub fn with(rng: &'r mut Rng, p: f64) -> Self {
        Dropout { rng: (p > 0.0).then_some((rng, p)) }
    }

    fn apply(&mut self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let Some((rng, p)) = &mut self.rng else { return Ok(x) };
        let keep = 1.0 - *p;
        let shape = tape.value(x).shape().to_vec();
        let numel = tape.value(x).numel();
        let data: Vec<f64> =
            (0..numel).map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 }).collect();
        let mask = tape.constant(Tensor::new(shape, data)?)?;
        tape.mul(x, mask)
    }
}

fn check_len(len: usize, max_len: usize) -> Result<()> {
    if len > max_len {
        return Err(Error::SequenceTooLong { len, max_len });
    }
    Ok(())
}

/// Token embedding plus learned positional embedding.
fn embed(tape: &mut Tape, params: &ModelParams, ids: &[u32]) -> Result<NodeId> {
    check_len(ids.len(), params.dims.max_len)?;
    let tok_table = tape.param(params.layout.tok_emb);
    let tok = tape.embedding(tok_table, ids)?;
    let positions: Vec<u32> = (0..ids.len() as u32).collect();
    let pos_table = tape.param(params.layout.pos_emb);
    let pos = tape.embedding(pos_table, &positions)?;
    tape.add(tok, pos)
}

fn layernorm(tape: &mut Tape, ids: NormIds, x: NodeId) -> Result<NodeId> {
    let g = tape.param(ids.gain);
    let b = tape.param(ids.bias);
    tape.layernorm(x, g, b)
}

fn attention(
    tape: &mut Tape,
    params: &ModelParams,
    ids: &AttnIds,
    q_in: NodeId,
    kv_in: NodeId,
    causal: bool,
    dropout: &mut Dropout,
) -> Result<NodeId> {
    let dims = &params.dims;
    let wq = tape.param(ids.wq);
    let wk = tape.param(ids.wk);
    let wv = tape.param(ids.wv);
    let q = tape.matmul(q_in, wq)?;
    let k = tape.matmul(kv_in, wk)?;
    let v = tape.matmul(kv_in, wv)?;

    let t_q = tape.value(q).shape()[0];
    let t_k = tape.value(k).shape()[0];
    let causal_mask = if causal {
        debug_assert_eq!(t_q, t_k);
        let mut data = vec![0.0; t_q * t_k];
        for i in 0..t_q {
            for j in (i + 1)..t_k {
                data[i * t_k + j] = -1e9;
            }
        }
        Some(tape.constant(Tensor::new(vec![t_q, t_k], data)?)?)
    } else {
        None
    };

    let scale = 1.0 / (dims.kv as f64).sqrt();
    let mut heads = Vec::with_capacity(dims.heads);
    for h in 0..dims.heads {
        let off = h * dims.kv;
        let qh = tape.slice_last(q, off, dims.kv)?;
        let kh = tape.slice_last(k, off, dims.kv)?;
        let vh = tape.slice_last(v, off, dims.kv)?;
        let scores = tape.matmul_nt(qh, kh)?;
        let mut scores = tape.scale(scores, scale)?;
        if let Some(mask) = causal_mask {
            scores = tape.add(scores, mask)?;
        }
        let probs = tape.softmax(scores)?;
        let probs = dropout.apply(tape, probs)?;
        heads.push(tape.matmul(probs, vh)?);
    }
    let ctx = tape.concat_last(&heads)?;
    let wo = tape.param(ids.wo);
    tape.matmul(ctx, wo)
}

fn feedforward(tape: &mut Tape, layer: &LayerIds, x: NodeId) -> Result<NodeId> {
    let w1 = tape.param(layer.ff1_w);
    let b1 = tape.param(layer.ff1_b);
    let w2 = tape.param(layer.ff2_w);
    let b2 = tape.param(layer.ff2_b);
    let h = tape.matmul(x, w1)?;
    let h = tape.add_bias(h, b1)?;
    let h = tape.relu(h)?;
    let h = tape.matmul(h, w2)?;
    tape.add_bias(h, b2)
}

fn encoder_stack(
    tape: &mut Tape,
    params: &ModelParams,
    embedded: NodeId,
    dropout: &mut Dropout,
) -> Result<NodeId> {
    let mut x = dropout.apply(tape, embedded)?;
    for layer in &params.layout.enc_layers {
        let h = layernorm(tape, layer.ln1, x)?;
        let a = attention(tape, params, &layer.attn, h, h, false, dropout)?;
        let a = dropout.apply(tape, a)?;
        x = tape.add(x, a)?;
        let h = layernorm(tape, layer.ln_ff, x)?;
        let f = feedforward(tape, layer, h)?;
        let f = dropout.apply(tape, f)?;
        x = tape.add(x, f)?;
    }
    layernorm(tape, params.layout.enc_final, x)
}

fn decoder_stack(
    tape: &mut Tape,
    params: &ModelParams,
    embedded: NodeId,
    memory: NodeId,
    dropout: &mut Dropout,
) -> Result<NodeId> {
    let mut x = dropout.apply(tape, embedded)?;
    for layer in &params.layout.dec_layers {
        let h = layernorm(tape, layer.ln1, x)?;
        let a = attention(tape, params, &layer.attn, h, h, true, dropout)?;
        let a = dropout.apply(tape, a)?;
        x = tape.add(x, a)?;
        let (cross_ln, cross_attn) =
            layer.cross.as_ref().expect("decoder layers have cross attention");
        let h = layernorm(tape, *cross_ln, x)?;
        let c = attention(tape, params, cross_attn, h, memory, false, dropout)?;
        let c = dropout.apply(tape, c)?;
        x = tape.add(x, c)?;
        let h = layernorm(tape, layer.ln_ff, x)?;
        let f = feedforward(tape, layer, h)?;
        let f = dropout.apply(tape, f)?;
        x = tape.add(x, f)?;
    }
    layernorm(tape, params.layout.dec_final, x)
}

/// Strategy-dependent encoder input built from (X, X_s, mask).
fn embed_inject(
    tape: &mut Tape,
    params: &ModelParams,
    ex: &AbstractedExample,
    grounded_id: Option<u32>,
) -> Result<NodeId> {
    match params.strategy {
        Strategy::EmbSum => {
            // emb(X) + mask ⊙ emb(X_s) + positional
            check_len(ex.x.len(), params.dims.max_len)?;
            let tok_table = tape.param(params.layout.tok_emb);
            let ex_emb = tape.embedding(tok_table, &ex.x)?;
            let es_emb = tape.embedding(tok_table, &ex.x_s)?;
            let gated = tape.masked_add_rows(ex_emb, es_emb, &ex.mask)?;
            let positions: Vec<u32> = (0..ex.x.len() as u32).collect();
            let pos_table = tape.param(params.layout.pos_emb);
            let pos = tape.embedding(pos_table, &positions)?;
            tape.add(gated, pos)
        }
        Strategy::EmbCat => {
            // [emb(X) ; emb(X_s')] · W1 + b1 + positional, where X_s' has
            // the <grounded> token at every non-entity position.
            let grounded = grounded_id.ok_or_else(|| {
                Error::Config("emb-cat requires a <grounded> vocabulary entry".into())
            })?;
            check_len(ex.x.len(), params.dims.max_len)?;
            let xs_grounded: Vec<u32> = ex
                .x_s
                .iter()
                .zip(&ex.mask)
                .map(|(&id, &is_entity)| if is_entity { id } else { grounded })
                .collect();
            let tok_table = tape.param(params.layout.tok_emb);
            let ex_emb = tape.embedding(tok_table, &ex.x)?;
            let eg_emb = tape.embedding(tok_table, &xs_grounded)?;
            let cat = tape.concat_last(&[ex_emb, eg_emb])?;
            let (w1, b1) = params.layout.w1.expect("emb-cat allocates W1");
            let w1 = tape.param(w1);
            let b1 = tape.param(b1);
            let proj = tape.matmul(cat, w1)?;
            let proj = tape.add_bias(proj, b1)?;
            let positions: Vec<u32> = (0..ex.x.len() as u32).collect();
            let pos_table = tape.param(params.layout.pos_emb);
            let pos = tape.embedding(pos_table, &positions)?;
            tape.add(proj, pos)
        }
        _ => embed(tape, params, &ex.x),
    }
}

/// Encode and combine into the decoder memory for any strategy.
fn build_memory(
    tape: &mut Tape,
    params: &ModelParams,
    ex: &AbstractedExample,
    grounded_id: Option<u32>,
    dropout: &mut Dropout,
) -> Result<NodeId> {
    let enc_in = embed_inject(tape, params, ex, grounded_id)?;
    let h = encoder_stack(tape, params, enc_in, dropout)?;
    match params.strategy {
        Strategy::EncSum => {
            let s_in = embed(tape, params, &ex.x_s)?;
            let h_s = encoder_stack(tape, params, s_in, dropout)?;
            tape.add(h, h_s)
        }
        Strategy::EncCat => {
            let s_in = embed(tape, params, &ex.x_s)?;
            let h_s = encoder_stack(tape, params, s_in, dropout)?;
            let cat = tape.concat_last(&[h, h_s])?;
            let w2 = tape.param(params.layout.w2.expect("enc-cat allocates W2"));
            tape.matmul(cat, w2)
        }
        _ => Ok(h),
    }
}

/// Loss value and per-head components of one forward pass.
pub struct LossParts {
    pub loss: NodeId,
    pub total: f64,
    pub ce_lm: f64,
    pub ce_abs: Option<f64>,
    pub lm_logits: Tensor,
    pub abs_logits: Option<Tensor>,
}

/// Teacher-forced forward pass; `ex.y` must end with the eos token.
pub fn forward_loss<'p>(
    params: &'p ModelParams,
    ex: &AbstractedExample,
    bos: u32,
    pad: u32,
    grounded_id: Option<u32>,
    mut dropout: Dropout,
) -> Result<(Tape<'p>, LossParts)> {
    let mut tape = Tape::new(&params.store);
    let memory = build_memory(&mut tape, params, ex, grounded_id, &mut dropout)?;

    let mut dec_input = Vec::with_capacity(ex.y.len());
    dec_input.push(bos);
    dec_input.extend_from_slice(&ex.y[..ex.y.len() - 1]);
    let dec_emb = embed(&mut tape, params, &dec_input)?;
    let h_dec = decoder_stack(&mut tape, params, dec_emb, memory, &mut dropout)?;

    // Tied LM head: logits = (H / sqrt(d)) · emb^T.
    let h_scaled = tape.scale(h_dec, 1.0 / (params.dims.d as f64).sqrt())?;
    let tok_emb = tape.param(params.layout.tok_emb);
    let lm_logits = tape.matmul_nt(h_scaled, tok_emb)?;
    let lm_probs = tape.softmax(lm_logits)?;
    let ce_lm = tape.cross_entropy(lm_probs, &ex.y, pad)?;

    let (loss, ce_abs_val, abs_logits_val) = match params.strategy {
        Strategy::DecLoss => {
            // The auxiliary head predicts X_s, aligned to the decoder
            // length: truncated, or padded with ignored positions.
            let t_dec = dec_input.len();
            let mut abs_targets: Vec<u32> = ex.x_s.iter().copied().take(t_dec).collect();
            abs_targets.resize(t_dec, pad);
            let w_abs = tape.param(params.layout.w_abs.expect("dec-loss allocates W_abs"));
            let abs_logits = tape.matmul_nt(h_scaled, w_abs)?;
            let abs_probs = tape.softmax(abs_logits)?;
            let ce_abs = tape.cross_entropy(abs_probs, &abs_targets, pad)?;
            let half_lm = tape.scale(ce_lm, 0.5)?;
            let half_abs = tape.scale(ce_abs, 0.5)?;
            let loss = tape.add(half_lm, half_abs)?;
            (
                loss,
                Some(tape.value(ce_abs).scalar_value()),
                Some(tape.value(abs_logits).clone()),
            )
        }
        _ => (ce_lm, None, None),
    };

    let parts = LossParts {
        loss,
        total: tape.value(loss).scalar_value(),
        ce_lm: tape.value(ce_lm).scalar_value(),
        ce_abs: ce_abs_val,
        lm_logits: tape.value(lm_logits).clone(),
        abs_logits: abs_logits_val,
    };
    Ok((tape, parts))
}

/// Inference-time encoder pass: returns the decoder memory as a plain
/// tensor so decoding steps can run on their own tapes.
pub fn encode_memory(
    params: &ModelParams,
    ex: &AbstractedExample,
    grounded_id: Option<u32>,
) -> Result<Tensor> {
    let mut tape = Tape::new(&params.store);
    let mut dropout = Dropout::off();
    let memory = build_memory(&mut tape, params, ex, grounded_id, &mut dropout)?;
    Ok(tape.value(memory).clone())
}

/// Logits over the vocabulary for the next token after `prefix`.
pub fn decode_last_logits(
    params: &ModelParams,
    memory: &Tensor,
    prefix: &[u32],
) -> Result<Vec<f64>> {
    let mut tape = Tape::new(&params.store);
    let mem = tape.constant(memory.clone())?;
    let dec_emb = embed(&mut tape, params, prefix)?;
    let mut dropout = Dropout::off();
    let h_dec = decoder_stack(&mut tape, params, dec_emb, mem, &mut dropout)?;
    let h = tape.value(h_dec);
    let last = h.row(prefix.len() - 1);
    let emb = params.store.get(params.layout.tok_emb);
    let (v, d) = emb.dims2()?;
    let scale = 1.0 / (d as f64).sqrt();
    let mut logits = vec![0.0; v];
    for (j, l) in logits.iter_mut().enumerate() {
        let row = emb.row(j);
        let mut acc = 0.0;
        for (hv, ev) in last.iter().zip(row) {
            acc += hv * ev;
        }
        *l = acc * scale;
    }
    Ok(logits)
}
