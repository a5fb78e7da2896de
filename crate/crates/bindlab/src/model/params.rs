//! Parameter tensors.
//!
//! Values are held as f64 for numerically tight forward/backward math, but
//! every stored value is kept exactly representable in f32 (enforced after
//! init and after each optimizer step), so the f32 checkpoint payload
//! round-trips bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::rng::rng_for;
use rand::Rng;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor { shape, data: vec![value; n] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Per-layer parameters: pre-norm attention block plus pre-norm MLP block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub w_q: Tensor,
    pub b_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub b_v: Tensor,
    pub w_o: Tensor,
    pub b_o: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub w_fc: Tensor,
    pub b_fc: Tensor,
    pub w_proj: Tensor,
    pub b_proj: Tensor,
}

/// All model parameters. The token embedding doubles as the unembedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub tok_embed: Tensor,
    pub pos_embed: Tensor,
    pub layers: Vec<LayerParams>,
    pub lnf_gain: Tensor,
    pub lnf_bias: Tensor,
}

/// Canonical tensor names and shapes for a config, sorted by name.
pub fn expected_shapes(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let d = config.d_model;
    let ff = config.d_ff();
    let mut shapes = vec![
        ("tok_embed".to_string(), vec![config.vocab_size, d]),
        ("pos_embed".to_string(), vec![config.max_seq, d]),
        ("lnf_gain".to_string(), vec![d]),
        ("lnf_bias".to_string(), vec![d]),
    ];
    for l in 0..config.n_layers {
        let pre = format!("layer{l}");
        shapes.push((format!("{pre}.ln1_gain"), vec![d]));
        shapes.push((format!("{pre}.ln1_bias"), vec![d]));
        shapes.push((format!("{pre}.w_q"), vec![d, d]));
        shapes.push((format!("{pre}.b_q"), vec![d]));
        shapes.push((format!("{pre}.w_k"), vec![d, d]));
        shapes.push((format!("{pre}.w_v"), vec![d, d]));
        shapes.push((format!("{pre}.b_v"), vec![d]));
        shapes.push((format!("{pre}.w_o"), vec![d, d]));
        shapes.push((format!("{pre}.b_o"), vec![d]));
        shapes.push((format!("{pre}.ln2_gain"), vec![d]));
        shapes.push((format!("{pre}.ln2_bias"), vec![d]));
        shapes.push((format!("{pre}.w_fc"), vec![d, ff]));
        shapes.push((format!("{pre}.b_fc"), vec![ff]));
        shapes.push((format!("{pre}.w_proj"), vec![ff, d]));
        shapes.push((format!("{pre}.b_proj"), vec![d]));
    }
    shapes.sort_by(|a, b| a.0.cmp(&b.0));
    shapes
}

impl Params {
    /// Random initialization: N(0, 0.02) weights and embeddings, unit norm
    /// gains, zero biases. Values are f32-quantized.
    pub fn init(config: &ModelConfig, seed: u64) -> Params {
        let mut rng = rng_for(seed, "params-init");
        let mut normal = move |scale: f64| {
            // Box-Muller
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            (z * scale) as f32 as f64
        };
        let d = config.d_model;
        let ff = config.d_ff();
        let mut gaussian = |shape: Vec<usize>| {
            let n: usize = shape.iter().product();
            Tensor { shape, data: (0..n).map(|_| normal(0.02)).collect() }
        };
        let layers = (0..config.n_layers)
            .map(|_| LayerParams {
                ln1_gain: Tensor::filled(vec![d], 1.0),
                ln1_bias: Tensor::zeros(vec![d]),
                w_q: gaussian(vec![d, d]),
                b_q: Tensor::zeros(vec![d]),
                w_k: gaussian(vec![d, d]),
                w_v: gaussian(vec![d, d]),
                b_v: Tensor::zeros(vec![d]),
                w_o: gaussian(vec![d, d]),
                b_o: Tensor::zeros(vec![d]),
                ln2_gain: Tensor::filled(vec![d], 1.0),
                ln2_bias: Tensor::zeros(vec![d]),
                w_fc: gaussian(vec![d, ff]),
                b_fc: Tensor::zeros(vec![ff]),
                w_proj: gaussian(vec![ff, d]),
                b_proj: Tensor::zeros(vec![d]),
            })
            .collect();
        Params {
            tok_embed: gaussian(vec![config.vocab_size, d]),
            pos_embed: gaussian(vec![config.max_seq, d]),
            layers,
            lnf_gain: Tensor::filled(vec![d], 1.0),
            lnf_bias: Tensor::zeros(vec![d]),
        }
    }

    /// Same structure, all zeros (gradient/moment buffers).
    pub fn zeros_like(&self) -> Params {
        let zt = |t: &Tensor| Tensor::zeros(t.shape.clone());
        Params {
            tok_embed: zt(&self.tok_embed),
            pos_embed: zt(&self.pos_embed),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    ln1_gain: zt(&l.ln1_gain),
                    ln1_bias: zt(&l.ln1_bias),
                    w_q: zt(&l.w_q),
                    b_q: zt(&l.b_q),
                    w_k: zt(&l.w_k),
                    w_v: zt(&l.w_v),
                    b_v: zt(&l.b_v),
                    w_o: zt(&l.w_o),
                    b_o: zt(&l.b_o),
                    ln2_gain: zt(&l.ln2_gain),
                    ln2_bias: zt(&l.ln2_bias),
                    w_fc: zt(&l.w_fc),
                    b_fc: zt(&l.b_fc),
                    w_proj: zt(&l.w_proj),
                    b_proj: zt(&l.b_proj),
                })
                .collect(),
            lnf_gain: zt(&self.lnf_gain),
            lnf_bias: zt(&self.lnf_bias),
        }
    }

    /// Visit tensors in canonical name order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("tok_embed".into(), &self.tok_embed),
            ("pos_embed".into(), &self.pos_embed),
            ("lnf_gain".into(), &self.lnf_gain),
            ("lnf_bias".into(), &self.lnf_bias),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            let pre = format!("layer{l}");
            out.push((format!("{pre}.ln1_gain"), &layer.ln1_gain));
            out.push((format!("{pre}.ln1_bias"), &layer.ln1_bias));
            out.push((format!("{pre}.w_q"), &layer.w_q));
            out.push((format!("{pre}.b_q"), &layer.b_q));
            out.push((format!("{pre}.w_k"), &layer.w_k));
            out.push((format!("{pre}.w_v"), &layer.w_v));
            out.push((format!("{pre}.b_v"), &layer.b_v));
            out.push((format!("{pre}.w_o"), &layer.w_o));
            out.push((format!("{pre}.b_o"), &layer.b_o));
            out.push((format!("{pre}.ln2_gain"), &layer.ln2_gain));
            out.push((format!("{pre}.ln2_bias"), &layer.ln2_bias));
            out.push((format!("{pre}.w_fc"), &layer.w_fc));
            out.push((format!("{pre}.b_fc"), &layer.b_fc));
            out.push((format!("{pre}.w_proj"), &layer.w_proj));
            out.push((format!("{pre}.b_proj"), &layer.b_proj));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![
            ("tok_embed".into(), &mut self.tok_embed),
            ("pos_embed".into(), &mut self.pos_embed),
            ("lnf_gain".into(), &mut self.lnf_gain),
            ("lnf_bias".into(), &mut self.lnf_bias),
        ];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let pre = format!("layer{l}");
            out.push((format!("{pre}.ln1_gain"), &mut layer.ln1_gain));
            out.push((format!("{pre}.ln1_bias"), &mut layer.ln1_bias));
            out.push((format!("{pre}.w_q"), &mut layer.w_q));
            out.push((format!("{pre}.b_q"), &mut layer.b_q));
            out.push((format!("{pre}.w_k"), &mut layer.w_k));
            out.push((format!("{pre}.w_v"), &mut layer.w_v));
            out.push((format!("{pre}.b_v"), &mut layer.b_v));
            out.push((format!("{pre}.w_o"), &mut layer.w_o));
            out.push((format!("{pre}.b_o"), &mut layer.b_o));
            out.push((format!("{pre}.ln2_gain"), &mut layer.ln2_gain));
            out.push((format!("{pre}.ln2_bias"), &mut layer.ln2_bias));
            out.push((format!("{pre}.w_fc"), &mut layer.w_fc));
            out.push((format!("{pre}.b_fc"), &mut layer.b_fc));
            out.push((format!("{pre}.w_proj"), &mut layer.w_proj));
            out.push((format!("{pre}.b_proj"), &mut layer.b_proj));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Round every value to its nearest f32.
    pub fn quantize_f32(&mut self) {
        for (_, t) in self.named_mut() {
            for v in &mut t.data {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Shape check against a config.
    pub fn validate_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = expected_shapes(config);
        let actual = self.named();
        if actual.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "parameter count mismatch: {} tensors, config expects {}",
                actual.len(),
                expected.len()
            )));
        }
        for ((en, es), (an, at)) in expected.iter().zip(actual.iter()) {
            if en != an || es != &at.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {an} has shape {:?}, config expects {en} with {:?}",
                    at.shape, es
                )));
            }
        }
        Ok(())
    }

    pub fn n_parameters(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 16,
            d_head: 8,
            vocab_size: 20,
            max_seq: 8,
            seed: 0,
        }
    }

    #[test]
    fn init_is_deterministic_and_f32_clean() {
        let a = Params::init(&config(), 3);
        let b = Params::init(&config(), 3);
        assert_eq!(a, b);
        let c = Params::init(&config(), 4);
        assert_ne!(a, c);
        for (_, t) in a.named() {
            for &v in &t.data {
                assert_eq!(v, v as f32 as f64);
            }
        }
    }

    #[test]
    fn names_match_expected_shapes() {
        let p = Params::init(&config(), 3);
        p.validate_shapes(&config()).unwrap();
        let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
        let expected: Vec<String> = expected_shapes(&config()).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, expected);
        assert_eq!(names.len(), 4 + 2 * 15);
    }

    #[test]
    fn quantize_is_idempotent() {
        let mut p = Params::init(&config(), 3);
        p.tok_embed.data[0] = 0.1f64 + 1e-12; // not f32-representable
        p.quantize_f32();
        let snapshot = p.clone();
        p.quantize_f32();
        assert_eq!(p, snapshot);
    }
}
