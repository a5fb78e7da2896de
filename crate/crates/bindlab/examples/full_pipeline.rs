//! The whole pipeline end to end on one model: benchmark generation,
//! training, association gate, baseline pairing effect, head discovery,
//! knockout with the random-head null, dose-response, knowledge probe, and
//! generation steering.
//!
//! Run the quick version (about a minute):
//!
//! ```bash
//! cargo run --release --example full_pipeline
//! ```
//!
//! or the desk-scale reference setup (several minutes):
//!
//! ```bash
//! cargo run --release --example full_pipeline -- --reference
//! ```

#[path = "common/mod.rs"]
mod common;

use std::time::Instant;

use bindlab::discovery::discover_heads;
use bindlab::experiments::{
    run_baseline, run_dose_response, run_knockout, run_knowledge_probe, run_random_baseline,
    run_steering, Condition,
};
use bindlab::model::{Checkpoint, ModelConfig};
use bindlab::train::{eval_association_accuracy, train_toy, LrSchedule, TrainConfig};
use bindlab::world::{
    build_catalog, generate_training_corpus, make_factorial_pairs, make_knowledge_pairs,
    make_steering_eval, Vocab,
};

fn main() {
    let reference = std::env::args().any(|a| a == "--reference");
    let started = Instant::now();
    let seed = 7;

    let (catalog, model_config, train_config, pairs_per_item, repeats, trials) = if reference {
        (
            build_catalog(seed, 16, 16, 8, 4).unwrap(),
            ModelConfig {
                n_layers: 4,
                n_heads: 8,
                d_model: 128,
                d_head: 16,
                vocab_size: Vocab::shared().len(),
                max_seq: 64,
                seed,
            },
            TrainConfig {
                steps: 900,
                batch_size: 32,
                learning_rate: 1.5e-3,
                lr_schedule: LrSchedule::Cosine,
                seed,
                eval_every: 50,
            },
            5,
            30,
            100,
        )
    } else {
        let (catalog, _) = common::micro_world();
        (
            catalog,
            common::micro_model_config(),
            TrainConfig {
                steps: 300,
                batch_size: 24,
                learning_rate: 2e-3,
                lr_schedule: LrSchedule::Cosine,
                seed,
                eval_every: 50,
            },
            4,
            20,
            30,
        )
    };

    println!("== world ==");
    let pairs = make_factorial_pairs(&catalog, pairs_per_item, seed).unwrap();
    let kpairs = make_knowledge_pairs(&pairs);
    let steering_eval = make_steering_eval(&catalog, &pairs, seed).unwrap();
    println!(
        "{} identities, {} items, {} factorial pairs, {} steering questions",
        catalog.identities.len(),
        catalog.items.len(),
        pairs.len(),
        steering_eval.len()
    );

    println!("\n== training ==");
    let corpus = generate_training_corpus(&catalog, repeats, seed).unwrap();
    println!("corpus: {} sentences", corpus.sequences.len());
    let (ckpt, trace) = train_toy(&model_config, &corpus.sequences, &train_config).unwrap();
    let last = trace.entries.last().unwrap();
    println!("final eval loss {:.4} at step {}", last.1, last.0);
    let acc = eval_association_accuracy(&ckpt, &catalog).unwrap();
    println!("association accuracy: {acc:.3}");

    println!("\n== baseline pairing effect ==");
    let baseline = run_baseline(&ckpt, &pairs).unwrap();
    println!(
        "|dS| = {:.4} (mean dS {:+.4}), item-level t = {:.2}, p_two = {:.2e}",
        baseline.strength,
        baseline.item_means.means.iter().sum::<f64>() / baseline.item_means.n_items() as f64,
        baseline.t_vs_zero.statistic,
        baseline.t_vs_zero.p_two_sided
    );
    println!(
        "directional preference: match {:.3}, mismatch {:.3}",
        baseline.dir_pref_match, baseline.dir_pref_mismatch
    );

    println!("\n== head discovery ==");
    let candidates = discover_heads(&ckpt, &pairs, seed).unwrap();
    for c in &candidates {
        println!(
            "L{}H{}: folds {}/5, mean|coef| {:.4}",
            c.layer, c.head, c.folds_selected, c.mean_abs_coef
        );
    }
    if candidates.is_empty() {
        println!("no stable candidates; stopping here");
        return;
    }
    let heads: Vec<_> = candidates.iter().take(6).map(|c| c.head_id()).collect();

    println!("\n== knockout ==");
    let r = run_knockout(&ckpt, &pairs, &heads, Condition::RToItem).unwrap();
    let u = run_knockout(&ckpt, &pairs, &heads, Condition::UToItem).unwrap();
    println!("R->item: {:+.2}%   U->item: {:+.2}%", r.percent_change, u.percent_change);

    println!("\n== random-head null ({trials} trials) ==");
    let null = run_random_baseline(&ckpt, &pairs, &heads, trials, seed).unwrap();
    println!(
        "observed {:+.2}% vs null mean {:+.2}% (sd {:.2}), 5th pctl {:+.2}%: {}",
        null.observed, null.null_mean, null.null_sd, null.null_p5, null.empirical_p
    );
    println!("U control above 5th pctl: {}", u.percent_change >= null.null_p5);

    println!("\n== dose-response ==");
    let curve =
        run_dose_response(&ckpt, &pairs, &heads, &[0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0])
            .unwrap();
    for p in &curve.points {
        println!("alpha {:>4}: strength {:.4} ({:+.1}%)", p.alpha, p.strength, p.percent_change);
    }

    println!("\n== knowledge probe ==");
    let probe = run_knowledge_probe(&ckpt, &pairs, &kpairs, &heads, Condition::RToItem).unwrap();
    println!(
        "baseline |dS| {:.4}, |dK| {:.4}, gap {:.2}x",
        probe.s.baseline_strength, probe.k.baseline_strength, probe.gap_ratio_baseline
    );
    println!(
        "knockout: S {:+.2}%, K {:+.2}%, K/S {}",
        probe.s.percent_change,
        probe.k.percent_change,
        probe
            .knockout_ratio
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "n/a".into())
    );

    println!("\n== generation steering ==");
    let steer = run_steering(&ckpt, &steering_eval, &heads, &[0.0, 1.0, 2.0, 3.0, 5.0], 4).unwrap();
    for p in &steer.points {
        println!(
            "alpha {:>4}: neq_acc {:.3} ({:+.1} pp), eq_acc {:.3} ({:+.1} pp)",
            p.alpha, p.accuracies.neq_acc, p.delta_neq_pp, p.accuracies.eq_acc, p.delta_eq_pp
        );
    }

    println!("\ntotal runtime: {:.1} s", started.elapsed().as_secs_f64());
}
