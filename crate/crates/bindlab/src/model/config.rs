//! Model configuration and intervention specifications.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::templates::Span;

/// Architecture hyperparameters of the toy decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_head: usize,
    pub vocab_size: usize,
    pub max_seq: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// MLP hidden width (fixed 4x convention).
    pub fn d_ff(&self) -> usize {
        4 * self.d_model
    }

    pub fn total_heads(&self) -> usize {
        self.n_layers * self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0
            || self.n_heads == 0
            || self.d_model == 0
            || self.d_head == 0
            || self.vocab_size == 0
            || self.max_seq == 0
        {
            return Err(Error::Config("all model dimensions must be at least 1".into()));
        }
        if self.d_model != self.n_heads * self.d_head {
            return Err(Error::Config(format!(
                "d_model {} must equal n_heads {} * d_head {}",
                self.d_model, self.n_heads, self.d_head
            )));
        }
        Ok(())
    }
}

/// One attention head, addressed by layer and head index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HeadId {
    pub layer: usize,
    pub head: usize,
}

impl HeadId {
    pub fn new(layer: usize, head: usize) -> HeadId {
        HeadId { layer, head }
    }

    /// Flat index in layer-major order.
    pub fn flat(&self, n_heads: usize) -> usize {
        self.layer * n_heads + self.head
    }

    pub fn from_flat(flat: usize, n_heads: usize) -> HeadId {
        HeadId { layer: flat / n_heads, head: flat % n_heads }
    }

    pub fn in_bounds(&self, config: &ModelConfig) -> bool {
        self.layer < config.n_layers && self.head < config.n_heads
    }
}

impl std::fmt::Display for HeadId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}H{}", self.layer, self.head)
    }
}

/// A rectangle of attention edges on one head: every (query, key) pair with
/// query in `query_span` and key in `key_span`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    pub head: HeadId,
    pub query_span: Span,
    pub key_span: Span,
}

/// What to do with the targeted edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InterventionMode {
    /// Pre-softmax scores on the edges are masked out; the attention row is
    /// renormalized over the remaining keys.
    Knockout,
    /// Each targeted head's output becomes `o_ko + alpha * (o_normal - o_ko)`:
    /// alpha 0 is knockout, 1 the unmodified head, above 1 amplification.
    Blend(f64),
}

/// A set of edges plus a mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub edges: Vec<EdgeSet>,
    pub mode: InterventionMode,
}

impl InterventionSpec {
    pub fn knockout(edges: Vec<EdgeSet>) -> InterventionSpec {
        InterventionSpec { edges, mode: InterventionMode::Knockout }
    }

    pub fn blend(edges: Vec<EdgeSet>, alpha: f64) -> Result<InterventionSpec> {
        if !alpha.is_finite() {
            return Err(Error::Intervention(format!("alpha must be finite, got {alpha}")));
        }
        Ok(InterventionSpec { edges, mode: InterventionMode::Blend(alpha) })
    }

    /// Check heads and spans against a model and sequence length. Spans must
    /// be non-empty, lie inside the sequence, and be causally reachable
    /// (every query position at or after every key position).
    pub fn validate(&self, config: &ModelConfig, seq_len: usize) -> Result<()> {
        if let InterventionMode::Blend(alpha) = self.mode {
            if !alpha.is_finite() {
                return Err(Error::Intervention("alpha must be finite".into()));
            }
        }
        for e in &self.edges {
            if !e.head.in_bounds(config) {
                return Err(Error::Intervention(format!(
                    "head {} outside model with {} layers x {} heads",
                    e.head, config.n_layers, config.n_heads
                )));
            }
            for (name, span) in [("query", e.query_span), ("key", e.key_span)] {
                if span.is_empty() {
                    return Err(Error::Intervention(format!("{name} span is empty")));
                }
                if span.end > seq_len {
                    return Err(Error::Intervention(format!(
                        "{name} span {}..{} outside sequence of length {seq_len}",
                        span.start, span.end
                    )));
                }
            }
            if e.query_span.start + 1 < e.key_span.end {
                return Err(Error::Intervention(format!(
                    "edges on head {} are not causally reachable: queries {}..{} precede keys {}..{}",
                    e.head, e.query_span.start, e.query_span.end, e.key_span.start, e.key_span.end
                )));
            }
        }
        Ok(())
    }

    /// Edge rectangles of one head.
    pub fn edges_for(&self, head: HeadId) -> Vec<(Span, Span)> {
        self.edges
            .iter()
            .filter(|e| e.head == head)
            .map(|e| (e.query_span, e.key_span))
            .collect()
    }

    /// Distinct heads targeted in a given layer.
    pub fn heads_in_layer(&self, layer: usize) -> Vec<HeadId> {
        let mut heads: Vec<HeadId> = self
            .edges
            .iter()
            .map(|e| e.head)
            .filter(|h| h.layer == layer)
            .collect();
        heads.sort();
        heads.dedup();
        heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 4,
            d_model: 32,
            d_head: 8,
            vocab_size: 50,
            max_seq: 16,
            seed: 0,
        }
    }

    #[test]
    fn config_dimension_invariant() {
        assert!(config().validate().is_ok());
        let mut bad = config();
        bad.d_head = 7;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn head_flat_round_trip() {
        let c = config();
        for layer in 0..c.n_layers {
            for head in 0..c.n_heads {
                let h = HeadId::new(layer, head);
                assert_eq!(HeadId::from_flat(h.flat(c.n_heads), c.n_heads), h);
            }
        }
        assert_eq!(HeadId::new(8, 16).to_string(), "L8H16");
    }

    #[test]
    fn spec_validation() {
        let c = config();
        let edge = EdgeSet {
            head: HeadId::new(1, 3),
            query_span: Span::new(8, 10),
            key_span: Span::new(2, 4),
        };
        let spec = InterventionSpec::knockout(vec![edge]);
        assert!(spec.validate(&c, 12).is_ok());
        // key span past the sequence end
        assert!(spec.validate(&c, 3).is_err());
        // out-of-range head
        let mut bad = spec.clone();
        bad.edges[0].head = HeadId::new(2, 0);
        assert!(bad.validate(&c, 12).is_err());
        // queries strictly before keys are unreachable
        let mut bad = spec.clone();
        bad.edges[0].query_span = Span::new(0, 2);
        assert!(bad.validate(&c, 12).is_err());
        // non-finite alpha rejected at construction
        assert!(InterventionSpec::blend(vec![edge], f64::NAN).is_err());
    }
}
