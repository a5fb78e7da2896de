// scratch: find the hang in the experiments path (removed before release)
use bindlab::experiments::run_baseline;
use bindlab::model::{Checkpoint, ModelConfig};
use bindlab::world::{build_catalog, make_factorial_pairs, Vocab};
use std::time::Instant;

fn main() {
    let t = Instant::now();
    let catalog = build_catalog(7, 8, 8, 4, 2).unwrap();
    println!("catalog: {:.3} s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let pairs = make_factorial_pairs(&catalog, 2, 19).unwrap();
    println!("pairs ({}): {:.3} s", pairs.len(), t.elapsed().as_secs_f64());

    let config = ModelConfig {
        n_layers: 2,
        n_heads: 4,
        d_model: 16,
        d_head: 4,
        vocab_size: Vocab::shared().len(),
        max_seq: 48,
        seed: 21,
    };
    let t = Instant::now();
    let model = Checkpoint::init(config).unwrap();
    println!("init: {:.3} s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let fwd = model.forward(&pairs[0].match_prompt, None).unwrap();
    println!("one forward (seq {}): {:.4} s", fwd.seq, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let report = run_baseline(&model, &pairs).unwrap();
    println!("baseline over {} pairs: {:.3} s, strength {:.4}", pairs.len(), t.elapsed().as_secs_f64(), report.strength);
}
