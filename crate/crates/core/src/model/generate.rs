//! Autoregressive decoding: greedy or nucleus (top-p) sampling.

use super::params::ModelParams;
use super::transformer::{decode_last_logits, encode_memory};
use crate::abstraction::AbstractedExample;
use crate::error::Result;
use crate::numkit::Tensor;
use crate::rng::Rng;
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Greedy,
    TopP { p: f64, temperature: f64 },
}

/// Indices of the smallest set of tokens whose cumulative probability
/// reaches `p`, highest-probability first.
pub fn nucleus_set(probs: &[f64], p: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    let mut cum = 0.0;
    let mut set = Vec::new();
    for idx in order {
        set.push(idx);
        cum += probs[idx];
        if cum >= p {
            break;
        }
    }
    set
}

fn softmax_with_temperature(logits: &[f64], temperature: f64) -> Vec<f64> {
    let t = if temperature <= 0.0 { 1.0 } else { temperature };
    let mut out: Vec<f64> = logits.iter().map(|l| l / t).collect();
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in &mut out {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Pick the next token id under the decoding mode. Greedy breaks ties
/// toward the lowest id, so it is fully deterministic.
pub fn sample_index(logits: &[f64], mode: DecodeMode, rng: &mut Rng) -> usize {
    match mode {
        DecodeMode::Greedy => {
            let mut best = 0;
            for (i, &v) in logits.iter().enumerate() {
                if v > logits[best] {
                    best = i;
                }
            }
            best
        }
        DecodeMode::TopP { p, temperature } => {
            let probs = softmax_with_temperature(logits, temperature);
            let set = nucleus_set(&probs, p);
            let total: f64 = set.iter().map(|&i| probs[i]).sum();
            let mut draw = rng.gen_range(0.0..total);
            for &i in &set {
                draw -= probs[i];
                if draw <= 0.0 {
                    return i;
                }
            }
            *set.last().unwrap()
        }
    }
}

/// Decode up to `max_new` tokens, stopping at eos. Returns generated ids
/// without bos/eos.
pub fn generate(
    params: &ModelParams,
    ex: &AbstractedExample,
    grounded_id: Option<u32>,
    bos: u32,
    eos: u32,
    mode: DecodeMode,
    max_new: usize,
    rng: &mut Rng,
) -> Result<Vec<u32>> {
    let memory = encode_memory(params, ex, grounded_id)?;
    generate_from_memory(params, &memory, bos, eos, mode, max_new, rng)
}

pub fn generate_from_memory(
    params: &ModelParams,
    memory: &Tensor,
    bos: u32,
    eos: u32,
    mode: DecodeMode,
    max_new: usize,
    rng: &mut Rng,
) -> Result<Vec<u32>> {
    let mut prefix = vec![bos];
    let mut out = Vec::new();
    for _ in 0..max_new {
        if prefix.len() >= params.dims.max_len {
            break;
        }
        let logits = decode_last_logits(params, memory, &prefix)?;
        let next = sample_index(&logits, mode, rng) as u32;
        if next == eos {
            break;
        }
        out.push(next);
        prefix.push(next);
    }
    Ok(out)
}
