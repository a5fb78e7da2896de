//! Per-head binding features.
//!
//! For each head, three features per prompt: the mean post-softmax attention
//! from the option-(a) identity span to the item span, the same from the
//! option-(b) identity span, and their average. Rows come in match/mismatch
//! pairs grouped by item so cross-validation can split by item.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::attention::AttentionRecord;
use crate::model::checkpoint::Checkpoint;
use crate::world::pairs::FactorialPair;
use crate::world::templates::SpanMap;

/// Binding features of one head on one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadFeatures {
    pub f_a: f64,
    pub f_b: f64,
    pub f_avg: f64,
}

/// Mean attention from each identity span to the item span, per head
/// (layer-major order).
pub fn extract_features(record: &AttentionRecord, spans: &SpanMap) -> Result<Vec<HeadFeatures>> {
    for (name, span) in [
        ("item", spans.item),
        ("identity_a", spans.identity_a),
        ("identity_b", spans.identity_b),
    ] {
        if span.is_empty() {
            return Err(Error::Input(format!("{name} span is empty")));
        }
        if span.end > record.seq_len {
            return Err(Error::Input(format!(
                "{name} span {}..{} outside sequence of length {}",
                span.start, span.end, record.seq_len
            )));
        }
    }
    if spans.identity_a.start < spans.item.end || spans.identity_b.start < spans.item.end {
        return Err(Error::Input(
            "identity spans must lie strictly after the item span".into(),
        ));
    }

    let mut out = Vec::with_capacity(record.n_layers * record.n_heads);
    for l in 0..record.n_layers {
        for h in 0..record.n_heads {
            let mat = record.head(l, h).primary();
            let mean_over = |qs: crate::world::templates::Span| -> f64 {
                let mut sum = 0.0;
                for q in qs.indices() {
                    for k in spans.item.indices() {
                        sum += mat.get(q, k);
                    }
                }
                sum / (qs.len() * spans.item.len()) as f64
            };
            let f_a = mean_over(spans.identity_a);
            let f_b = mean_over(spans.identity_b);
            out.push(HeadFeatures { f_a, f_b, f_avg: 0.5 * (f_a + f_b) });
        }
    }
    Ok(out)
}

/// Feature rows for a prompt set: one row per prompt, columns are
/// (f_a, f_b, f_avg) per head; labels are 1 for match and 0 for mismatch;
/// groups carry the item id of each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    /// Total head count (columns are 3x this).
    pub n_heads: usize,
    /// Heads per layer of the source model, for mapping flat indices back to
    /// (layer, head); synthetic matrices use `n_heads` (a single layer).
    pub heads_per_layer: usize,
    pub rows: Vec<f64>,
    pub labels: Vec<u8>,
    pub groups: Vec<u32>,
}

impl FeatureMatrix {
    pub fn n_cols(&self) -> usize {
        3 * self.n_heads
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.rows[i * c..(i + 1) * c]
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.n_rows() * self.n_cols() {
            return Err(Error::Schema("feature matrix shape mismatch".into()));
        }
        if self.groups.len() != self.n_rows() {
            return Err(Error::Schema("feature matrix groups do not cover all rows".into()));
        }
        if self.rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("feature matrix has non-finite entries".into()));
        }
        Ok(())
    }

    fn push_row(&mut self, feats: &[HeadFeatures], label: u8, group: u32) {
        for f in feats {
            self.rows.extend_from_slice(&[f.f_a, f.f_b, f.f_avg]);
        }
        self.labels.push(label);
        self.groups.push(group);
    }
}

/// Run both prompts of every pair through the model (no intervention) and
/// collect the feature matrix: one match row and one mismatch row per pair.
pub fn build_feature_matrix(
    checkpoint: &Checkpoint,
    pairs: &[FactorialPair],
) -> Result<FeatureMatrix> {
    let per_pair: Result<Vec<(Vec<HeadFeatures>, Vec<HeadFeatures>)>> = pairs
        .par_iter()
        .map(|p| {
            let m = checkpoint.forward(&p.match_prompt, None)?;
            let mm = checkpoint.forward(&p.mismatch_prompt, None)?;
            Ok((
                extract_features(&m.record, &p.match_spans)?,
                extract_features(&mm.record, &p.mismatch_spans)?,
            ))
        })
        .collect();
    let mut matrix = FeatureMatrix {
        n_heads: checkpoint.config.total_heads(),
        heads_per_layer: checkpoint.config.n_heads,
        rows: Vec::new(),
        labels: Vec::new(),
        groups: Vec::new(),
    };
    for (p, (mf, mmf)) in pairs.iter().zip(per_pair?) {
        matrix.push_row(&mf, 1, p.item);
        matrix.push_row(&mmf, 0, p.item);
    }
    matrix.validate()?;
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::attention::{AttnMatrix, HeadAttention};
    use crate::world::templates::Span;

    fn spans(item: (usize, usize), a: (usize, usize), b: (usize, usize)) -> SpanMap {
        SpanMap {
            item: Span::new(item.0, item.1),
            identity_a: Span::new(a.0, a.1),
            identity_b: Span::new(b.0, b.1),
            option_a: Span::new(a.0 - 1, a.0),
            option_b: Span::new(b.0 - 1, b.0),
            option_c: Span::new(b.1, b.1 + 1),
        }
    }

    fn uniform_record(seq: usize) -> AttentionRecord {
        // row q attends uniformly over keys 0..=q
        let mut mat = AttnMatrix::zeros(seq);
        for q in 0..seq {
            for k in 0..=q {
                mat.row_mut(q)[k] = 1.0 / (q + 1) as f64;
            }
        }
        AttentionRecord {
            n_layers: 1,
            n_heads: 1,
            seq_len: seq,
            heads: vec![HeadAttention::Used(mat)],
        }
    }

    #[test]
    fn uniform_attention_closed_form() {
        // item spans positions 2..4, identity_a positions 5..6
        let record = uniform_record(10);
        let sp = spans((2, 4), (5, 6), (8, 9));
        let feats = extract_features(&record, &sp).unwrap();
        // row 5 has 6 keys -> each key gets 1/6; mean over 2 item keys = 1/6
        assert!((feats[0].f_a - 1.0 / 6.0).abs() < 1e-12);
        // row 8 has 9 keys -> f_b = 1/9
        assert!((feats[0].f_b - 1.0 / 9.0).abs() < 1e-12);
        assert!((feats[0].f_avg - 0.5 * (1.0 / 6.0 + 1.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn one_hot_attention_on_single_token_item() {
        let seq = 8;
        let mut mat = AttnMatrix::zeros(seq);
        for q in 0..seq {
            if q >= 4 {
                mat.row_mut(q)[2] = 1.0; // one-hot on the item token
            } else {
                mat.row_mut(q)[0] = 1.0;
            }
        }
        let record = AttentionRecord {
            n_layers: 1,
            n_heads: 1,
            seq_len: seq,
            heads: vec![HeadAttention::Used(mat)],
        };
        let sp = spans((2, 3), (4, 5), (6, 7));
        let feats = extract_features(&record, &sp).unwrap();
        assert_eq!(feats[0].f_a, 1.0);
        assert_eq!(feats[0].f_b, 1.0);
    }

    #[test]
    fn masked_edges_give_zero_feature() {
        let seq = 8;
        let mat = AttnMatrix::zeros(seq); // knocked-out rows: all zeros on item keys
        let record = AttentionRecord {
            n_layers: 1,
            n_heads: 1,
            seq_len: seq,
            heads: vec![HeadAttention::Used(mat)],
        };
        let sp = spans((2, 3), (4, 5), (6, 7));
        let feats = extract_features(&record, &sp).unwrap();
        assert_eq!(feats[0].f_a, 0.0);
    }

    #[test]
    fn empty_and_misordered_spans_rejected() {
        let record = uniform_record(10);
        let mut sp = spans((2, 4), (5, 6), (8, 9));
        sp.item = Span::new(3, 3);
        assert!(extract_features(&record, &sp).is_err());
        // identity overlapping the item span
        let sp = spans((4, 6), (5, 7), (8, 9));
        assert!(extract_features(&record, &sp).is_err());
    }

    #[test]
    fn features_stay_in_unit_interval() {
        let record = uniform_record(12);
        let sp = spans((1, 3), (4, 6), (7, 10));
        for f in extract_features(&record, &sp).unwrap() {
            for v in [f.f_a, f.f_b, f.f_avg] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!((f.f_avg - 0.5 * (f.f_a + f.f_b)).abs() <= 1e-12);
        }
    }
}
