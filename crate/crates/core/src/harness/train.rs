//! Teacher-forced training with decoupled-weight-decay Adam, gradient-norm
//! clipping, and early stopping on validation loss.
//!
//! Entity tags are redrawn every epoch (unless frozen), so the model sees
//! the same example under different tag ids across epochs; that is what
//! pushes same-type tag embeddings together.

use crate::abstraction::{abstract_sequence, AbstractedExample, EntitySpan, LexiconTagger, Overflow};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::{forward_loss, Dropout, ModelParams};
use crate::numkit::{Grads, ParamStore, Tensor};
use crate::rng::substream;
use crate::vocab::Vocabulary;
use rand::seq::SliceRandom;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub dropout: f64,
    /// Multiplicative per-epoch learning-rate decay (1.0 = constant).
    pub lr_decay: f64,
    /// Keep one fixed tag draw instead of redrawing per epoch.
    pub freeze_tags: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            grad_clip: 1.0,
            patience: 10,
            max_epochs: 30,
            dropout: 0.1,
            lr_decay: 1.0,
            freeze_tags: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size and patience must be >= 1".into()));
        }
        if self.lr <= 0.0 || self.grad_clip <= 0.0 {
            return Err(Error::Config("lr and grad_clip must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr_decay must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay.
pub struct AdamW {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamW {
    pub fn new(store: &ParamStore, config: &TrainConfig) -> Self {
        let zeros: Vec<Tensor> =
            store.iter().map(|(_, _, t)| Tensor::zeros(t.shape().to_vec())).collect();
        AdamW {
            lr: config.lr,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
            weight_decay: config.weight_decay,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..store.len() {
            let pid = crate::numkit::ParamId(i);
            let g = grads.get(pid).data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let w = store.get_mut(pid).data_mut();
            for j in 0..w.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                w[j] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * w[j]);
            }
        }
    }
}

/// Early stopping on validation loss: strict improvement resets the
/// counter; `patience` consecutive non-improving epochs stop the run.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper { patience, best: f64::INFINITY, best_epoch: 0, since_best: 0 }
    }

    /// Returns (improved, should_stop) for the epoch's validation loss.
    pub fn observe(&mut self, epoch: usize, valid_loss: f64) -> (bool, bool) {
        if valid_loss < self.best {
            self.best = valid_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            (true, false)
        } else {
            self.since_best += 1;
            (false, self.since_best >= self.patience)
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Tokenized sample with its entity spans; abstraction happens per epoch.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub x: Vec<u32>,
    pub y: Vec<u32>,
    pub spans: Vec<EntitySpan>,
}

pub fn prepare(samples: &[Sample], vocab: &Vocabulary, tagger: &LexiconTagger) -> Vec<Prepared> {
    samples
        .iter()
        .map(|s| {
            let tokens: Vec<&str> = s.input.split_whitespace().collect();
            let spans = tagger.tag(&tokens);
            let x = vocab.encode(&s.input);
            let mut y = vocab.encode(&s.target);
            y.push(vocab.eos());
            Prepared { x, y, spans }
        })
        .collect()
}

/// Abstract one prepared example under a given tag-draw key.
pub fn abstract_prepared(
    prepared: &Prepared,
    vocab: &Vocabulary,
    seed: u64,
    draw_key: u64,
    example_idx: u64,
) -> Result<AbstractedExample> {
    let mut rng = substream(seed, "tag-draw", draw_key << 32 | example_idx);
    let (x_s, mask) =
        abstract_sequence(&prepared.x, &prepared.spans, vocab, &mut rng, Overflow::Error)?;
    Ok(AbstractedExample { x: prepared.x.clone(), x_s, mask, y: prepared.y.clone() })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub abs_loss: Option<f64>,
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub stopped_early: bool,
}

/// CSV log: epoch, train_loss, valid_loss, abs_loss (blank when absent).
pub fn write_train_log(log: &[EpochLog], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,train_loss,valid_loss,abs_loss")?;
    for row in log {
        let abs = row.abs_loss.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(f, "{},{:.6},{:.6},{}", row.epoch, row.train_loss, row.valid_loss, abs)?;
    }
    Ok(())
}

/// Train until the validation loss stops improving for `patience` epochs or
/// `max_epochs` is hit; returns the best-validation-loss parameters.
/// `max_epochs == 0` saves the initialization untouched.
pub fn train(
    mut params: ModelParams,
    train_set: &[Sample],
    valid_set: &[Sample],
    vocab: &Vocabulary,
    tagger: &LexiconTagger,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let prepared_train = prepare(train_set, vocab, tagger);
    let prepared_valid = prepare(valid_set, vocab, tagger);
    let grounded = vocab.grounded();
    let (bos, pad) = (vocab.bos(), vocab.pad());

    let mut optimizer = AdamW::new(&params.store, config);
    let mut log = Vec::new();
    let mut stopper = EarlyStopper::new(config.patience);
    let mut best_store = params.store.clone();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let draw_key = if config.freeze_tags { 0 } else { epoch as u64 };
        optimizer.lr = config.lr * config.lr_decay.powi(epoch as i32 - 1);

        let mut order: Vec<usize> = (0..prepared_train.len()).collect();
        order.shuffle(&mut substream(config.seed, "epoch-shuffle", epoch as u64));

        let mut dropout_rng = substream(config.seed, "dropout", epoch as u64);
        let mut epoch_loss = 0.0;
        let mut epoch_abs = 0.0;
        let mut abs_seen = false;
        let mut step = 0usize;
        for batch in order.chunks(config.batch_size) {
            step += 1;
            let mut grads = Grads::zeros_like(&params.store);
            for &idx in batch {
                let ex = abstract_prepared(
                    &prepared_train[idx],
                    vocab,
                    config.seed,
                    draw_key,
                    idx as u64,
                )?;
                let dropout = if config.dropout > 0.0 {
                    Dropout::with(&mut dropout_rng, config.dropout)
                } else {
                    Dropout::off()
                };
                let (tape, parts) = forward_loss(&params, &ex, bos, pad, grounded, dropout)?;
                if !parts.total.is_finite() {
                    return Err(Error::DivergedLoss { epoch, step });
                }
                epoch_loss += parts.total;
                if let Some(a) = parts.ce_abs {
                    epoch_abs += a;
                    abs_seen = true;
                }
                tape.backward(parts.loss, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            grads.clip_global_norm(config.grad_clip);
            optimizer.step(&mut params.store, &grads);
        }
        let train_loss = epoch_loss / prepared_train.len().max(1) as f64;
        if !train_loss.is_finite() {
            return Err(Error::DivergedLoss { epoch, step });
        }

        // Validation pass: no dropout, same epoch's tag draw.
        let mut valid_loss = 0.0;
        for (idx, p) in prepared_valid.iter().enumerate() {
            let ex = abstract_prepared(p, vocab, config.seed, draw_key, (1 << 20) + idx as u64)?;
            let (_, parts) = forward_loss(&params, &ex, bos, pad, grounded, Dropout::off())?;
            valid_loss += parts.total;
        }
        valid_loss /= prepared_valid.len().max(1) as f64;
        if !valid_loss.is_finite() {
            return Err(Error::DivergedLoss { epoch, step });
        }

        log.push(EpochLog {
            epoch,
            train_loss,
            valid_loss,
            abs_loss: abs_seen.then(|| epoch_abs / prepared_train.len().max(1) as f64),
        });

        let (improved, stop) = stopper.observe(epoch, valid_loss);
        if improved {
            best_store = params.store.clone();
        }
        if stop {
            stopped_early = true;
            break;
        }
    }

    if stopper.best_epoch() > 0 {
        params.store = best_store;
    }
    Ok(TrainOutcome {
        params,
        log,
        best_epoch: stopper.best_epoch(),
        best_valid_loss: stopper.best_loss(),
        stopped_early,
    })
}
