// scratch: training diagnostics (removed before release)
use bindlab::metrics::{s_score, OptionLogits};
use bindlab::model::{Checkpoint, ModelConfig};
use bindlab::train::{eval_association_accuracy, train_toy, LrSchedule, TrainConfig};
use bindlab::world::templates::knowledge_prompt;
use bindlab::world::{build_catalog, generate_training_corpus, Vocab, OPTION_IDS};
use std::time::Instant;

fn probe(ckpt: &Checkpoint, catalog: &bindlab::world::Catalog) {
    // look at what the model actually predicts on one knowledge question
    let vocab = Vocab::shared();
    let item = catalog.linked_items().next().unwrap();
    let r = catalog.identity(item.associated.unwrap());
    let foil = catalog
        .identities
        .iter()
        .find(|i| i.group != r.group)
        .unwrap();
    let built = knowledge_prompt(&item.surface, &r.surface, &foil.surface);
    let fwd = ckpt.forward(&built.tokens, None).unwrap();
    let row = fwd.last_logits(ckpt.config.vocab_size);
    let l = OptionLogits::from_logit_row(row, OPTION_IDS).unwrap();
    println!(
        "  K-match probe ({} with R at a): la {:.3} lb {:.3} lc {:.3} -> S {:.3}",
        vocab.decode(&item.surface),
        l.ell_a,
        l.ell_b,
        l.ell_c,
        s_score(l)
    );
    // swap R out: mismatch analog
    let foil2 = catalog
        .identities
        .iter()
        .rev()
        .find(|i| i.group != r.group && i.id != foil.id)
        .unwrap();
    let built = knowledge_prompt(&item.surface, &foil2.surface, &foil.surface);
    let fwd = ckpt.forward(&built.tokens, None).unwrap();
    let l = OptionLogits::from_logit_row(fwd.last_logits(ckpt.config.vocab_size), OPTION_IDS)
        .unwrap();
    println!(
        "  K-mismatch probe: la {:.3} lb {:.3} lc {:.3} -> S {:.3}",
        l.ell_a, l.ell_b, l.ell_c,
        s_score(l)
    );
}

fn main() {
    let seed = 7;
    let catalog = build_catalog(seed, 16, 16, 8, 4).unwrap();
    let corpus = generate_training_corpus(&catalog, 30, seed).unwrap();
    println!("corpus: {} sentences, longest {}", corpus.sequences.len(), corpus.max_len());

    let config = ModelConfig {
        n_layers: 4,
        n_heads: 8,
        d_model: 128,
        d_head: 16,
        vocab_size: Vocab::shared().len(),
        max_seq: 64,
        seed,
    };
    for steps in [1200usize, 2000] {
        let train = TrainConfig {
            steps,
            batch_size: 32,
            learning_rate: 2.5e-3,
            lr_schedule: LrSchedule::Cosine,
            seed,
            eval_every: steps / 4,
        };
        let t = Instant::now();
        let (ckpt, trace) = train_toy(&config, &corpus.sequences, &train).unwrap();
        let acc = eval_association_accuracy(&ckpt, &catalog).unwrap();
        println!(
            "steps {steps:>5}: loss {:.4} -> {:.4}, assoc acc {acc:.3} ({:.0} s)",
            trace.entries.first().unwrap().1,
            trace.entries.last().unwrap().1,
            t.elapsed().as_secs_f64()
        );
        probe(&ckpt, &catalog);
    }
}
