//! Deterministic training of the toy model, plus the association-accuracy
//! gate that checks the catalog was actually learned.
//!
//! The optimizer is Adam (beta1 0.9, beta2 0.999, eps 1e-8, no weight
//! decay); the exact descriptor is recorded in the checkpoint metadata and
//! in run manifests. Gradients for a batch are accumulated over a fixed
//! number of chunks that parallelize across threads while keeping the
//! summation order independent of the thread schedule, and parameters are
//! re-quantized to f32 values after every step, so the final checkpoint is a
//! pure function of (model config, corpus, train config).

pub mod backward;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::checkpoint::Checkpoint;
use crate::model::config::ModelConfig;
use crate::model::generate::argmax_token;
use crate::model::params::Params;
use crate::rng::rng_for;
use crate::world::catalog::Catalog;
use crate::world::templates::knowledge_prompt;
use crate::world::vocab::{OPTION_IDS, OPT_A};

pub use backward::{sequence_grads, sequence_loss};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Chunk count for batch-gradient accumulation; fixed so the reduction
/// order does not depend on the thread count.
const GRAD_CHUNKS: usize = 8;

pub fn optimizer_descriptor() -> String {
    format!("adam(beta1={ADAM_BETA1},beta2={ADAM_BETA2},eps={ADAM_EPS},weight_decay=0)")
}

/// Learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    Cosine,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        Ok(())
    }

    fn lr_at(&self, step: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine => {
                let t = step as f64 / self.steps as f64;
                self.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

/// Per-eval loss values, `(step, mean cross-entropy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub entries: Vec<(usize, f64)>,
}

/// Mean cross-entropy of a set of sequences.
pub fn batch_loss(config: &ModelConfig, params: &Params, seqs: &[Vec<u32>]) -> Result<f64> {
    let chunk = seqs.len().div_ceil(GRAD_CHUNKS).max(1);
    let partials: Result<Vec<(f64, usize)>> = seqs
        .par_chunks(chunk)
        .map(|chunk_seqs| {
            let mut loss = 0.0;
            let mut count = 0usize;
            for s in chunk_seqs {
                let (l, c) = sequence_loss(config, params, s)?;
                loss += l;
                count += c;
            }
            Ok((loss, count))
        })
        .collect();
    let mut loss = 0.0;
    let mut count = 0usize;
    for (l, c) in partials? {
        loss += l;
        count += c;
    }
    if count == 0 {
        return Err(Error::Input("no trainable predictions in batch".into()));
    }
    Ok(loss / count as f64)
}

/// Mean cross-entropy and mean parameter gradients of a batch.
pub fn batch_grads(
    config: &ModelConfig,
    params: &Params,
    seqs: &[Vec<u32>],
) -> Result<(f64, Params)> {
    let chunk = seqs.len().div_ceil(GRAD_CHUNKS).max(1);
    let partials: Result<Vec<(f64, usize, Params)>> = seqs
        .par_chunks(chunk)
        .map(|chunk_seqs| {
            let mut grads = params.zeros_like();
            let mut loss = 0.0;
            let mut count = 0usize;
            for s in chunk_seqs {
                let (l, c) = sequence_grads(config, params, s, &mut grads)?;
                loss += l;
                count += c;
            }
            Ok((loss, count, grads))
        })
        .collect();
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    let mut count = 0usize;
    for (l, c, g) in partials? {
        loss += l;
        count += c;
        for ((_, dst), (_, src)) in total.named_mut().into_iter().zip(g.named()) {
            for (a, b) in dst.data.iter_mut().zip(&src.data) {
                *a += b;
            }
        }
    }
    if count == 0 {
        return Err(Error::Input("no trainable predictions in batch".into()));
    }
    let inv = 1.0 / count as f64;
    for (_, t) in total.named_mut() {
        for v in &mut t.data {
            *v *= inv;
        }
    }
    Ok((loss / count as f64, total))
}

/// Train the toy model on a corpus. Returns the final checkpoint and the
/// per-eval loss trace; aborts with the trace collected so far if the loss
/// stops being finite.
pub fn train_toy(
    model_config: &ModelConfig,
    corpus: &[Vec<u32>],
    train_config: &TrainConfig,
) -> Result<(Checkpoint, LossTrace)> {
    model_config.validate()?;
    train_config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    if let Some(longest) = corpus.iter().map(Vec::len).max() {
        if longest > model_config.max_seq {
            return Err(Error::Config(format!(
                "corpus sequence of length {longest} exceeds max_seq {}",
                model_config.max_seq
            )));
        }
    }

    let mut params = Params::init(model_config, model_config.seed);
    let mut m = params.zeros_like();
    let mut v = params.zeros_like();

    // fixed eval subset: evenly strided sample of the corpus
    let n_eval = corpus.len().min(64);
    let eval_set: Vec<Vec<u32>> = (0..n_eval)
        .map(|i| corpus[i * corpus.len() / n_eval].clone())
        .collect();

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut order_rng = rng_for(train_config.seed, "batch-order");
    order.shuffle(&mut order_rng);
    let mut cursor = 0usize;

    let mut trace = LossTrace { entries: Vec::new() };
    let eval0 = batch_loss(model_config, &params, &eval_set)?;
    trace.entries.push((0, eval0));

    for step in 0..train_config.steps {
        let mut batch: Vec<Vec<u32>> = Vec::with_capacity(train_config.batch_size);
        for _ in 0..train_config.batch_size {
            if cursor >= order.len() {
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            batch.push(corpus[order[cursor]].clone());
            cursor += 1;
        }

        let (train_loss, grads) = batch_grads(model_config, &params, &batch)?;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { step, trace: trace.entries });
        }

        let lr = train_config.lr_at(step);
        let t = (step + 1) as f64;
        let bc1 = 1.0 - ADAM_BETA1.powf(t);
        let bc2 = 1.0 - ADAM_BETA2.powf(t);
        for (((_, p), (_, g)), ((_, mt), (_, vt))) in params
            .named_mut()
            .into_iter()
            .zip(grads.named())
            .zip(m.named_mut().into_iter().zip(v.named_mut()))
        {
            for i in 0..p.data.len() {
                let grad = g.data[i];
                mt.data[i] = ADAM_BETA1 * mt.data[i] + (1.0 - ADAM_BETA1) * grad;
                vt.data[i] = ADAM_BETA2 * vt.data[i] + (1.0 - ADAM_BETA2) * grad * grad;
                let mhat = mt.data[i] / bc1;
                let vhat = vt.data[i] / bc2;
                p.data[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
        params.quantize_f32();

        let is_last = step + 1 == train_config.steps;
        if (step + 1) % train_config.eval_every == 0 || is_last {
            let eval = batch_loss(model_config, &params, &eval_set)?;
            if !eval.is_finite() {
                return Err(Error::Diverged { step: step + 1, trace: trace.entries });
            }
            trace.entries.push((step + 1, eval));
        }
    }

    let mut ckpt = Checkpoint::new(*model_config, params)?;
    ckpt.meta.insert("optimizer".into(), optimizer_descriptor());
    ckpt.meta.insert("train_steps".into(), train_config.steps.to_string());
    ckpt.meta.insert("train_seed".into(), train_config.seed.to_string());
    Ok((ckpt, trace))
}

/// For each linked item, pose the knowledge question with the associated
/// identity against one foreign foil; the answer is the argmax over the
/// three option-letter logits at the final position. Returns the fraction
/// answered with the associated identity's letter.
pub fn eval_association_accuracy(checkpoint: &Checkpoint, catalog: &Catalog) -> Result<f64> {
    let linked: Vec<_> = catalog.linked_items().collect();
    if linked.is_empty() {
        return Err(Error::Config("catalog has no linked items to probe".into()));
    }
    let mut rng = rng_for(catalog.seed, "assoc-eval");
    let mut questions = Vec::with_capacity(linked.len());
    for item in &linked {
        let r = catalog.identity(item.associated.unwrap());
        let foreign: Vec<u32> = catalog.foreign_identities(&r.group).map(|i| i.id).collect();
        let foil = catalog.identity(foreign[rng.gen_range(0..foreign.len())]);
        let r_at_a: bool = rng.gen_bool(0.5);
        let (a, b) = if r_at_a {
            (&r.surface, &foil.surface)
        } else {
            (&foil.surface, &r.surface)
        };
        questions.push((knowledge_prompt(&item.surface, a, b).tokens, r_at_a));
    }
    let hits: Result<Vec<bool>> = questions
        .par_iter()
        .map(|(prompt, r_at_a)| {
            let fwd = checkpoint.forward(prompt, None)?;
            let row = fwd.last_logits(checkpoint.config.vocab_size);
            let option_logits: Vec<f64> =
                OPTION_IDS.iter().map(|&id| row[id as usize]).collect();
            let winner = OPTION_IDS[argmax_token(&option_logits) as usize];
            Ok(match (winner, r_at_a) {
                (id, true) if id == OPT_A => true,
                (id, false) if id == crate::world::vocab::OPT_B => true,
                _ => false,
            })
        })
        .collect();
    let hits = hits?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
}

use rand::Rng;

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 12,
            d_head: 6,
            vocab_size: 20,
            max_seq: 10,
            seed: 3,
        }
    }

    fn micro_batch() -> Vec<Vec<u32>> {
        vec![
            vec![1, 5, 9, 13, 2, 7],
            vec![3, 3, 11, 0, 19, 6, 4],
            vec![18, 2, 2, 15],
        ]
    }

    /// Central finite differences against the analytic batch gradient,
    /// compared per parameter group in relative norm.
    #[test]
    fn gradients_match_finite_differences() {
        let config = micro_config();
        let params = Params::init(&config, 3);
        let batch = micro_batch();
        let (_, grads) = batch_grads(&config, &params, &batch).unwrap();

        let eps = 1e-3;
        for ((name, g), (_, p)) in grads.named().into_iter().zip(params.named()) {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..p.data.len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                {
                    let (_, t) = plus
                        .named_mut()
                        .into_iter()
                        .find(|(n, _)| n == &name)
                        .unwrap();
                    t.data[i] = (t.data[i] + eps) as f32 as f64;
                }
                {
                    let (_, t) = minus
                        .named_mut()
                        .into_iter()
                        .find(|(n, _)| n == &name)
                        .unwrap();
                    t.data[i] = (t.data[i] - eps) as f32 as f64;
                }
                let step = {
                    let tp = plus.named().into_iter().find(|(n, _)| n == &name).unwrap().1.data[i];
                    let tm = minus.named().into_iter().find(|(n, _)| n == &name).unwrap().1.data[i];
                    tp - tm
                };
                let lp = batch_loss(&config, &plus, &batch).unwrap();
                let lm = batch_loss(&config, &minus, &batch).unwrap();
                let fd = (lp - lm) / step;
                num += (fd - g.data[i]) * (fd - g.data[i]);
                den += fd * fd + g.data[i] * g.data[i];
            }
            let rel = (num / den.max(1e-300)).sqrt();
            assert!(rel <= 1e-3, "group {name}: relative error {rel:.3e}");
        }
    }

    #[test]
    fn zero_steps_rejected() {
        let cfg = TrainConfig {
            steps: 0,
            batch_size: 2,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Constant,
            seed: 1,
            eval_every: 1,
        };
        assert!(cfg.validate().is_err());
        assert!(train_toy(&micro_config(), &micro_batch(), &cfg).is_err());
    }

    #[test]
    fn training_is_reproducible_and_learns() {
        let cfg = TrainConfig {
            steps: 30,
            batch_size: 3,
            learning_rate: 3e-3,
            lr_schedule: LrSchedule::Cosine,
            seed: 5,
            eval_every: 10,
        };
        let (a, trace_a) = train_toy(&micro_config(), &micro_batch(), &cfg).unwrap();
        let (b, trace_b) = train_toy(&micro_config(), &micro_batch(), &cfg).unwrap();
        assert_eq!(a, b, "same seed must give identical checkpoints");
        assert_eq!(trace_a, trace_b);
        let first = trace_a.entries.first().unwrap().1;
        let last = trace_a.entries.last().unwrap().1;
        assert!(last <= first, "loss should not increase: {first} -> {last}");
    }

    #[test]
    fn empty_corpus_rejected() {
        let cfg = TrainConfig {
            steps: 1,
            batch_size: 1,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Constant,
            seed: 1,
            eval_every: 1,
        };
        assert!(train_toy(&micro_config(), &[], &cfg).is_err());
    }
}
