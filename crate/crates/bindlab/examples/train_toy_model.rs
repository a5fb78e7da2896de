//! Generate a corpus, train the small model, and verify it actually learned
//! the associations before any experiment would run on it.
//!
//! ```bash
//! cargo run --release --example train_toy_model
//! ```

#[path = "common/mod.rs"]
mod common;

use bindlab::train::eval_association_accuracy;
use bindlab::world::generate_training_corpus;

fn main() {
    let (catalog, _) = common::micro_world();
    let corpus = generate_training_corpus(&catalog, 20, common::EXAMPLE_SEED).unwrap();
    println!(
        "corpus: {} sentences over {} linked and {} neutral items (longest {})",
        corpus.sequences.len(),
        catalog.linked_items().count(),
        catalog.neutral_items().count(),
        corpus.max_len()
    );

    let ckpt = common::train_micro_model(&catalog);
    println!(
        "model: {} layers x {} heads, d_model {}, {} parameters",
        ckpt.config.n_layers,
        ckpt.config.n_heads,
        ckpt.config.d_model,
        ckpt.params.n_parameters()
    );

    let accuracy = eval_association_accuracy(&ckpt, &catalog).unwrap();
    println!("association accuracy (true identity vs one foil): {accuracy:.3}");

    // checkpoints round-trip bit-exactly
    let mut bytes = Vec::new();
    ckpt.save(&mut bytes).unwrap();
    let loaded = bindlab::model::Checkpoint::load(bytes.as_slice()).unwrap();
    assert_eq!(ckpt, loaded);
    println!("checkpoint round trip: {} bytes, bit-exact", bytes.len());
}
