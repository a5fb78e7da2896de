//! Shared setup for the runnable examples: a small world and a quickly
//! trainable model so every example finishes in well under a minute.

use bindlab::model::{Checkpoint, ModelConfig};
use bindlab::train::{train_toy, LrSchedule, TrainConfig};
use bindlab::world::{
    build_catalog, generate_training_corpus, make_factorial_pairs, Catalog, FactorialPair, Vocab,
};

pub const EXAMPLE_SEED: u64 = 7;

pub fn micro_world() -> (Catalog, Vec<FactorialPair>) {
    let catalog = build_catalog(EXAMPLE_SEED, 12, 12, 6, 3).expect("catalog");
    let pairs = make_factorial_pairs(&catalog, 4, EXAMPLE_SEED).expect("pairs");
    (catalog, pairs)
}

pub fn micro_model_config() -> ModelConfig {
    ModelConfig {
        n_layers: 2,
        n_heads: 4,
        d_model: 48,
        d_head: 12,
        vocab_size: Vocab::shared().len(),
        max_seq: 48,
        seed: EXAMPLE_SEED,
    }
}

/// Train a small model on the micro world; takes roughly half a minute.
pub fn train_micro_model(catalog: &Catalog) -> Checkpoint {
    let corpus = generate_training_corpus(catalog, 20, EXAMPLE_SEED).expect("corpus");
    let config = micro_model_config();
    let train = TrainConfig {
        steps: 300,
        batch_size: 24,
        learning_rate: 2e-3,
        lr_schedule: LrSchedule::Cosine,
        seed: EXAMPLE_SEED,
        eval_every: 50,
    };
    let (ckpt, trace) = train_toy(&config, &corpus.sequences, &train).expect("training");
    let first = trace.entries.first().unwrap();
    let last = trace.entries.last().unwrap();
    eprintln!(
        "[setup] trained micro model: eval loss {:.3} (step {}) -> {:.3} (step {})",
        first.1, first.0, last.1, last.0
    );
    ckpt
}
