//! The toy decoder-only transformer: configuration, parameters, forward pass
//! with edge interventions, greedy generation, and checkpoint files.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod generate;
pub mod linalg;
pub mod params;

pub use attention::{
    blend_head_output, mask_scores, softmax_masked, AttentionRecord, AttnMatrix, HeadAttention,
};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use config::{EdgeSet, HeadId, InterventionMode, InterventionSpec, ModelConfig};
pub use forward::ForwardOutput;
pub use generate::{argmax_token, greedy_generate};
pub use params::{expected_shapes, Params, Tensor};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::templates::Span;

    fn small_config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 4,
            d_model: 32,
            d_head: 8,
            vocab_size: 40,
            max_seq: 16,
            seed: 5,
        }
    }

    fn small_model() -> Checkpoint {
        Checkpoint::init(small_config()).unwrap()
    }

    fn tokens() -> Vec<u32> {
        vec![3, 9, 14, 2, 27, 31, 8, 5, 19, 11]
    }

    fn edges(head: HeadId) -> Vec<EdgeSet> {
        vec![EdgeSet {
            head,
            query_span: Span::new(6, 9),
            key_span: Span::new(1, 3),
        }]
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn blend_alpha_one_matches_baseline() {
        let m = small_model();
        let base = m.forward(&tokens(), None).unwrap();
        let spec = InterventionSpec::blend(edges(HeadId::new(1, 2)), 1.0).unwrap();
        let blended = m.forward(&tokens(), Some(&spec)).unwrap();
        assert!(max_abs_diff(&base.logits, &blended.logits) <= 1e-6);
    }

    #[test]
    fn blend_alpha_zero_matches_knockout() {
        let m = small_model();
        let e = edges(HeadId::new(0, 1));
        let ko = m
            .forward(&tokens(), Some(&InterventionSpec::knockout(e.clone())))
            .unwrap();
        let blended = m
            .forward(&tokens(), Some(&InterventionSpec::blend(e, 0.0).unwrap()))
            .unwrap();
        assert!(max_abs_diff(&ko.logits, &blended.logits) <= 1e-6);
    }

    #[test]
    fn knockout_redistributes_uniform_row() {
        // zeroed key projection -> all scores equal -> uniform causal rows
        let config = ModelConfig {
            n_layers: 1,
            n_heads: 1,
            d_model: 8,
            d_head: 8,
            vocab_size: 12,
            max_seq: 8,
            seed: 1,
        };
        let mut params = Params::init(&config, 1);
        params.layers[0].w_k.data.fill(0.0);
        let m = Checkpoint::new(config, params).unwrap();
        let spec = InterventionSpec::knockout(vec![EdgeSet {
            head: HeadId::new(0, 0),
            query_span: Span::new(2, 3),
            key_span: Span::new(2, 3),
        }]);
        let out = m.forward(&[1, 2, 3], Some(&spec)).unwrap();
        let row = match out.record.head(0, 0) {
            HeadAttention::Used(mat) => mat.row(2).to_vec(),
            _ => panic!("knockout records a single pattern"),
        };
        assert_eq!(row, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn intervention_locality_within_layer() {
        let m = small_model();
        let base = m.forward(&tokens(), None).unwrap();
        let spec = InterventionSpec::knockout(edges(HeadId::new(0, 2)));
        let out = m.forward(&tokens(), Some(&spec)).unwrap();
        for h in 0..m.config.n_heads {
            if h == 2 {
                continue;
            }
            assert_eq!(
                base.record.head(0, h),
                out.record.head(0, h),
                "head {h} in the intervened layer must be untouched"
            );
        }
    }

    #[test]
    fn causality_no_future_attention() {
        let m = small_model();
        for spec in [
            None,
            Some(InterventionSpec::knockout(edges(HeadId::new(1, 0)))),
        ] {
            let out = m.forward(&tokens(), spec.as_ref()).unwrap();
            for l in 0..m.config.n_layers {
                for h in 0..m.config.n_heads {
                    let mat = out.record.head(l, h).primary();
                    for q in 0..out.seq {
                        for k in q + 1..out.seq {
                            assert_eq!(mat.get(q, k), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn record_rows_sum_to_one() {
        let m = small_model();
        let out = m.forward(&tokens(), None).unwrap();
        for l in 0..m.config.n_layers {
            for h in 0..m.config.n_heads {
                let mat = out.record.head(l, h).primary();
                for q in 0..out.seq {
                    let s: f64 = mat.row(q).iter().sum();
                    assert!((s - 1.0).abs() <= 1e-6, "L{l}H{h} row {q} sums to {s}");
                }
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let m = small_model();
        let a = m.forward(&tokens(), None).unwrap();
        let b = m.forward(&tokens(), None).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.record, b.record);
    }

    #[test]
    fn forward_input_validation() {
        let m = small_model();
        assert!(m.forward(&[], None).is_err());
        assert!(m.forward(&vec![1; 17], None).is_err());
        assert!(m.forward(&[39], None).is_ok());
        assert!(m.forward(&[40], None).is_err());
        // out-of-bounds edge
        let spec = InterventionSpec::knockout(vec![EdgeSet {
            head: HeadId::new(0, 0),
            query_span: Span::new(8, 12),
            key_span: Span::new(0, 1),
        }]);
        assert!(m.forward(&tokens()[..6], Some(&spec)).is_err());
    }

    #[test]
    fn generation_endpoints_and_determinism() {
        let m = small_model();
        let prompt = tokens();
        assert_eq!(
            greedy_generate(&m, &prompt, None, 0).unwrap(),
            Vec::<u32>::new()
        );
        let a = greedy_generate(&m, &prompt, None, 5).unwrap();
        let b = greedy_generate(&m, &prompt, None, 5).unwrap();
        assert_eq!(a, b);
        let spec = InterventionSpec::blend(edges(HeadId::new(1, 1)), 1.0).unwrap();
        let steered = greedy_generate(&m, &prompt, Some(&spec), 5).unwrap();
        assert_eq!(a, steered, "alpha=1 must not change the continuation");
        // context window cap
        let long: Vec<u32> = (0..15).map(|i| (i % 12) as u32).collect();
        let capped = greedy_generate(&m, &long, None, 10).unwrap();
        assert_eq!(capped.len(), 1);
    }

    #[test]
    fn checkpoint_round_trip_bit_exact() {
        let m = small_model();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let loaded = Checkpoint::load(buf.as_slice()).unwrap();
        assert_eq!(m, loaded);
        // save again: byte-identical file
        let mut buf2 = Vec::new();
        loaded.save(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let m = small_model();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();

        // truncated payload
        let cut = buf.len() - 5;
        assert!(Checkpoint::load(&buf[..cut]).is_err());

        // corrupted manifest offset
        let text = String::from_utf8_lossy(&buf[..buf.iter().position(|&b| b == b'\n').unwrap()])
            .to_string();
        let broken = text.replacen("\"offset\":0", "\"offset\":4", 1);
        let mut tampered = broken.into_bytes();
        tampered.push(b'\n');
        tampered.extend_from_slice(&buf[buf.iter().position(|&b| b == b'\n').unwrap() + 1..]);
        assert!(Checkpoint::load(tampered.as_slice()).is_err());

        // header shape inconsistent with config
        let shape_broken = String::from_utf8_lossy(&buf[..buf.iter().position(|&b| b == b'\n').unwrap()])
            .replacen("\"shape\":[32]", "\"shape\":[31]", 1)
            .into_bytes();
        let mut tampered = shape_broken;
        tampered.push(b'\n');
        tampered.extend_from_slice(&buf[buf.iter().position(|&b| b == b'\n').unwrap() + 1..]);
        assert!(Checkpoint::load(tampered.as_slice()).is_err());
    }
}
