//! Masked softmax, head-output blending, and the per-head attention record.
//!
//! Masking is an explicit flag resolved inside the softmax: masked entries
//! are excluded from the max shift and the normalizing sum, so they come out
//! exactly 0.0 with no large-negative-float overflow path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major post-softmax attention matrix; entries above the diagonal are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnMatrix {
    pub seq: usize,
    pub data: Vec<f64>,
}

impl AttnMatrix {
    pub fn zeros(seq: usize) -> AttnMatrix {
        AttnMatrix { seq, data: vec![0.0; seq * seq] }
    }

    #[inline]
    pub fn get(&self, query: usize, key: usize) -> f64 {
        self.data[query * self.seq + key]
    }

    pub fn row(&self, query: usize) -> &[f64] {
        &self.data[query * self.seq..(query + 1) * self.seq]
    }

    pub fn row_mut(&mut self, query: usize) -> &mut [f64] {
        &mut self.data[query * self.seq..(query + 1) * self.seq]
    }
}

/// What one head attended to during a forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HeadAttention {
    /// The single attention pattern the head used (normal, or masked under
    /// knockout).
    Used(AttnMatrix),
    /// Under blending both variants feed the output; both are recorded.
    Blended { normal: AttnMatrix, masked: AttnMatrix },
}

impl HeadAttention {
    /// The pattern to read features from: the used matrix, or the normal
    /// variant for a blended head.
    pub fn primary(&self) -> &AttnMatrix {
        match self {
            HeadAttention::Used(m) => m,
            HeadAttention::Blended { normal, .. } => normal,
        }
    }

    pub fn masked_variant(&self) -> Option<&AttnMatrix> {
        match self {
            HeadAttention::Used(_) => None,
            HeadAttention::Blended { masked, .. } => Some(masked),
        }
    }
}

/// Post-softmax attention of every head in a forward pass, layer-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub n_layers: usize,
    pub n_heads: usize,
    pub seq_len: usize,
    pub heads: Vec<HeadAttention>,
}

impl AttentionRecord {
    pub fn head(&self, layer: usize, head: usize) -> &HeadAttention {
        &self.heads[layer * self.n_heads + head]
    }
}

/// Softmax over one row of pre-softmax scores with an optional key mask.
/// Masked keys are excluded from the max shift and the sum and come out
/// exactly zero. Errors if every key is masked.
pub fn softmax_masked(scores: &[f64], mask: Option<&[bool]>, out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(scores.len(), out.len());
    let is_masked = |j: usize| mask.is_some_and(|m| m[j]);
    let mut max = f64::NEG_INFINITY;
    for (j, &s) in scores.iter().enumerate() {
        if !is_masked(j) && s > max {
            max = s;
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateRow(
            "every key in the row is masked".to_string(),
        ));
    }
    let mut sum = 0.0;
    for (j, &s) in scores.iter().enumerate() {
        if is_masked(j) {
            out[j] = 0.0;
        } else {
            let e = (s - max).exp();
            out[j] = e;
            sum += e;
        }
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    // division leaves exact zeros untouched
    Ok(())
}

/// Probabilities for a score row with the given keys masked out.
pub fn mask_scores(scores: &[f64], masked_keys: &[usize]) -> Result<Vec<f64>> {
    let mut mask = vec![false; scores.len()];
    for &k in masked_keys {
        if k >= scores.len() {
            return Err(Error::Intervention(format!(
                "masked key {k} outside row of length {}",
                scores.len()
            )));
        }
        mask[k] = true;
    }
    let mut out = vec![0.0; scores.len()];
    softmax_masked(scores, Some(&mask), &mut out)?;
    Ok(out)
}

/// o_ko + alpha * (o_normal - o_ko), elementwise.
pub fn blend_head_output(o_normal: &[f64], o_ko: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if o_normal.len() != o_ko.len() {
        return Err(Error::Intervention(format!(
            "blend dimension mismatch: {} vs {}",
            o_normal.len(),
            o_ko.len()
        )));
    }
    Ok(o_normal
        .iter()
        .zip(o_ko)
        .map(|(&n, &k)| k + alpha * (n - k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mask_scores_examples() {
        // scores [0, 0], mask {1} -> [1, 0]
        assert_eq!(mask_scores(&[0.0, 0.0], &[1]).unwrap(), vec![1.0, 0.0]);

        // scores [ln 2, 0, 0], mask {2} -> [2/3, 1/3, 0]
        let p = mask_scores(&[2f64.ln(), 0.0, 0.0], &[2]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(p[2], 0.0);

        // empty mask -> plain softmax
        let p = mask_scores(&[1.0, 2.0], &[]).unwrap();
        let z = (1f64).exp() + (2f64).exp();
        assert!((p[0] - 1f64.exp() / z).abs() < 1e-12);
        assert!((p[1] - 2f64.exp() / z).abs() < 1e-12);
    }

    #[test]
    fn all_masked_is_degenerate_not_nan() {
        let err = mask_scores(&[0.5, -0.5], &[0, 1]).unwrap_err();
        assert!(matches!(err, Error::DegenerateRow(_)));
    }

    #[test]
    fn out_of_range_mask_rejected() {
        assert!(mask_scores(&[0.0], &[3]).is_err());
    }

    #[test]
    fn blend_endpoints_and_extrapolation() {
        let o_n = [1.0, -2.0];
        let o_k = [0.4, 0.0];
        assert_eq!(blend_head_output(&o_n, &o_k, 0.0).unwrap(), vec![0.4, 0.0]);
        assert_eq!(blend_head_output(&o_n, &o_k, 1.0).unwrap(), vec![1.0, -2.0]);
        let b = blend_head_output(&[1.0], &[0.4], 2.0).unwrap();
        assert!((b[0] - 1.6).abs() < 1e-12);
        assert!(blend_head_output(&[1.0], &[1.0, 2.0], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn masked_rows_are_zero_and_normalized(
            scores in proptest::collection::vec(-30.0..30.0f64, 2..12),
            mask_bits in proptest::collection::vec(any::<bool>(), 2..12),
        ) {
            let n = scores.len().min(mask_bits.len());
            let scores = &scores[..n];
            let mut mask = mask_bits[..n].to_vec();
            mask[0] = false; // keep at least one key
            let mut out = vec![0.0; n];
            softmax_masked(scores, Some(&mask), &mut out).unwrap();
            let mut sum = 0.0;
            for j in 0..n {
                if mask[j] {
                    prop_assert_eq!(out[j], 0.0);
                } else {
                    prop_assert!(out[j] > 0.0);
                    sum += out[j];
                }
            }
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn blend_is_affine_in_alpha(
            o_n in proptest::collection::vec(-5.0..5.0f64, 1..8),
            o_k in proptest::collection::vec(-5.0..5.0f64, 1..8),
        ) {
            let n = o_n.len().min(o_k.len());
            let (o_n, o_k) = (&o_n[..n], &o_k[..n]);
            let half = blend_head_output(o_n, o_k, 0.5).unwrap();
            let lo = blend_head_output(o_n, o_k, 0.0).unwrap();
            let hi = blend_head_output(o_n, o_k, 1.0).unwrap();
            for j in 0..n {
                let mid = 0.5 * (lo[j] + hi[j]);
                prop_assert!((half[j] - mid).abs() <= 1e-9);
            }
        }
    }
}
