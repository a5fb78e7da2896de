//! Edge interventions on the attention level: masked softmax rows, exact
//! knockout zeros, and the alpha-blend endpoints.
//!
//! ```bash
//! cargo run --release --example attention_intervention
//! ```

use bindlab::model::{
    blend_head_output, mask_scores, Checkpoint, EdgeSet, HeadAttention, HeadId, InterventionSpec,
    ModelConfig,
};
use bindlab::world::{Span, Vocab};

fn main() {
    // the masking primitive: exact zeros, renormalized rows
    let scores = [2f64.ln(), 0.0, 0.0];
    println!("softmax({scores:?})            = {:?}", mask_scores(&scores, &[]).unwrap());
    println!("softmax({scores:?}, mask {{2}}) = {:?}", mask_scores(&scores, &[2]).unwrap());

    // blending is affine in alpha between knockout and baseline
    let o_normal = [1.0, -0.5];
    let o_ko = [0.4, 0.1];
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        println!("blend alpha={alpha}: {:?}", blend_head_output(&o_normal, &o_ko, alpha).unwrap());
    }

    // on a real forward pass: knock out one edge rectangle of one head
    let config = ModelConfig {
        n_layers: 2,
        n_heads: 4,
        d_model: 32,
        d_head: 8,
        vocab_size: Vocab::shared().len(),
        max_seq: 16,
        seed: 11,
    };
    let model = Checkpoint::init(config).unwrap();
    let prompt: Vec<u32> = vec![5, 9, 41, 60, 8, 17, 33, 21];
    let head = HeadId::new(1, 2);
    let spec = InterventionSpec::knockout(vec![EdgeSet {
        head,
        query_span: Span::new(5, 7),
        key_span: Span::new(1, 3),
    }]);

    let base = model.forward(&prompt, None).unwrap();
    let ko = model.forward(&prompt, Some(&spec)).unwrap();
    let base_row = base.record.head(1, 2).primary().row(5).to_vec();
    let ko_row = match ko.record.head(1, 2) {
        HeadAttention::Used(m) => m.row(5).to_vec(),
        _ => unreachable!("knockout records a single pattern"),
    };
    println!("\nhead {head}, query position 5:");
    println!("  baseline row: {base_row:.3?}");
    println!("  knockout row: {ko_row:.3?}   (keys 1..3 are exactly zero)");

    let max_logit_shift = base
        .logits
        .iter()
        .zip(&ko.logits)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        ;
    println!("  max |logit shift| from this single edge rectangle: {max_logit_shift:.4}");

    // endpoints: alpha=1 reproduces the baseline, alpha=0 the knockout
    let at = |alpha: f64| {
        let spec = InterventionSpec::blend(
            vec![EdgeSet { head, query_span: Span::new(5, 7), key_span: Span::new(1, 3) }],
            alpha,
        )
        .unwrap();
        model.forward(&prompt, Some(&spec)).unwrap().logits
    };
    let diff = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max)
    };
    println!("\nblend endpoints:");
    println!("  max|blend(1) - baseline| = {:.2e}", diff(&at(1.0), &base.logits));
    println!("  max|blend(0) - knockout| = {:.2e}", diff(&at(0.0), &ko.logits));
}
