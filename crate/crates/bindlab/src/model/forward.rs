//! The causal decoder forward pass.
//!
//! Pre-norm residual blocks, learned positional embeddings, tied
//! embedding/unembedding. The key projection carries no bias: a constant
//! shift of every key adds the same value to each score in a row, which the
//! softmax cancels exactly, so such a bias would be inert. Interventions act inside attention: knockout masks
//! the targeted pre-softmax edges on the targeted head only; blending
//! computes both the normal and the masked attention for a targeted head in
//! the same pass and mixes the two head outputs, so alpha=1 reproduces the
//! baseline and alpha=0 the knockout bit for bit.
//!
//! Rows that a mask does not touch go through the identical masked-softmax
//! code path with an all-false mask, which keeps untargeted positions
//! bitwise equal to the unintervened forward.

use crate::error::{Error, Result};
use crate::model::attention::{softmax_masked, AttentionRecord, AttnMatrix, HeadAttention};
use crate::model::config::{HeadId, InterventionMode, InterventionSpec, ModelConfig};
use crate::model::linalg::{add_bias, dot, matmul, matmul_a_bt};
use crate::model::params::Params;

pub(crate) const LN_EPS: f64 = 1e-5;

/// Logits and the attention actually used, for every position.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Row-major seq x vocab.
    pub logits: Vec<f64>,
    pub record: AttentionRecord,
    pub seq: usize,
}

impl ForwardOutput {
    pub fn logits_at(&self, pos: usize, vocab: usize) -> &[f64] {
        &self.logits[pos * vocab..(pos + 1) * vocab]
    }

    pub fn last_logits(&self, vocab: usize) -> &[f64] {
        self.logits_at(self.seq - 1, vocab)
    }
}

/// Intermediate activations kept for the backward pass.
pub(crate) struct LayerTrace {
    pub ln1_xhat: Vec<f64>,
    pub ln1_rstd: Vec<f64>,
    pub ln1_out: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    pub attn_concat: Vec<f64>,
    pub ln2_xhat: Vec<f64>,
    pub ln2_rstd: Vec<f64>,
    pub ln2_out: Vec<f64>,
    pub fc_pre: Vec<f64>,
    pub fc_act: Vec<f64>,
}

pub(crate) struct Trace {
    pub layers: Vec<LayerTrace>,
    pub lnf_xhat: Vec<f64>,
    pub lnf_rstd: Vec<f64>,
    pub lnf_out: Vec<f64>,
}

/// LayerNorm over the last dimension; records the normalized activations and
/// reciprocal standard deviations for the backward pass.
pub(crate) fn layer_norm(
    x: &[f64],
    n: usize,
    d: usize,
    gain: &[f64],
    bias: &[f64],
    xhat: &mut Vec<f64>,
    rstd: &mut Vec<f64>,
    out: &mut Vec<f64>,
) {
    xhat.resize(n * d, 0.0);
    rstd.resize(n, 0.0);
    out.resize(n * d, 0.0);
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        for j in 0..d {
            let xh = (row[j] - mean) * r;
            xhat[i * d + j] = xh;
            out[i * d + j] = xh * gain[j] + bias[j];
        }
    }
}

pub(crate) fn gelu(u: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * u * (1.0 + (C * (u + 0.044715 * u * u * u)).tanh())
}

pub(crate) fn gelu_grad(u: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let t = (C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * u * u)
}

/// Run the forward pass. `want_trace` retains activations for backprop
/// (training never passes an intervention).
pub(crate) fn run_forward(
    config: &ModelConfig,
    params: &Params,
    tokens: &[u32],
    intervention: Option<&InterventionSpec>,
    want_trace: bool,
) -> Result<(ForwardOutput, Option<Trace>)> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(Error::Input("empty token sequence".into()));
    }
    if tokens.len() > config.max_seq {
        return Err(Error::Input(format!(
            "sequence of length {} exceeds max_seq {}",
            tokens.len(),
            config.max_seq
        )));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= config.vocab_size) {
        return Err(Error::Input(format!(
            "token id {bad} outside vocabulary of size {}",
            config.vocab_size
        )));
    }
    if let Some(spec) = intervention {
        spec.validate(config, tokens.len())?;
        debug_assert!(!want_trace, "backward does not run under interventions");
    }

    let seq = tokens.len();
    let d = config.d_model;
    let dh = config.d_head;
    let ff = config.d_ff();
    let n_heads = config.n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut x = vec![0.0; seq * d];
    for (i, &t) in tokens.iter().enumerate() {
        let e = &params.tok_embed.data[t as usize * d..(t as usize + 1) * d];
        let p = &params.pos_embed.data[i * d..(i + 1) * d];
        for j in 0..d {
            x[i * d + j] = e[j] + p[j];
        }
    }

    let mut record_heads: Vec<HeadAttention> = Vec::with_capacity(config.total_heads());
    let mut traces: Vec<LayerTrace> = Vec::new();

    let mut ln_xhat = Vec::new();
    let mut ln_rstd = Vec::new();
    let mut h = Vec::new();
    let mut q = vec![0.0; seq * d];
    let mut k = vec![0.0; seq * d];
    let mut v = vec![0.0; seq * d];
    let mut scores = vec![0.0; seq];
    let mut mask_row = vec![false; seq];
    let mut concat = vec![0.0; seq * d];
    let mut o = vec![0.0; seq * d];
    let mut fc_pre = vec![0.0; seq * ff];
    let mut fc_act = vec![0.0; seq * ff];
    let mut mlp_out = vec![0.0; seq * d];

    for (l, layer) in params.layers.iter().enumerate() {
        layer_norm(&x, seq, d, &layer.ln1_gain.data, &layer.ln1_bias.data, &mut ln_xhat, &mut ln_rstd, &mut h);
        let (ln1_xhat, ln1_rstd, ln1_out) = if want_trace {
            (ln_xhat.clone(), ln_rstd.clone(), h.clone())
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };

        matmul(&h, seq, d, &layer.w_q.data, d, &mut q);
        add_bias(&mut q, &layer.b_q.data, seq, d);
        matmul(&h, seq, d, &layer.w_k.data, d, &mut k);
        matmul(&h, seq, d, &layer.w_v.data, d, &mut v);
        add_bias(&mut v, &layer.b_v.data, seq, d);

        concat.fill(0.0);
        for head in 0..n_heads {
            let off = head * dh;
            let head_id = HeadId::new(l, head);
            let rects = intervention
                .map(|s| s.edges_for(head_id))
                .unwrap_or_default();
            let targeted = !rects.is_empty();

            let mut normal = AttnMatrix::zeros(seq);
            let mut masked = if targeted { Some(AttnMatrix::zeros(seq)) } else { None };

            for i in 0..seq {
                for j in 0..=i {
                    scores[j] = scale
                        * dot(
                            &q[i * d + off..i * d + off + dh],
                            &k[j * d + off..j * d + off + dh],
                        );
                }
                mask_row[..=i].fill(false);
                softmax_masked(&scores[..=i], Some(&mask_row[..=i]), &mut normal.row_mut(i)[..=i])?;
                if let Some(masked) = masked.as_mut() {
                    for &(qs, ks) in &rects {
                        if i >= qs.start && i < qs.end {
                            for mj in ks.start..ks.end.min(i + 1) {
                                mask_row[mj] = true;
                            }
                        }
                    }
                    softmax_masked(&scores[..=i], Some(&mask_row[..=i]), &mut masked.row_mut(i)[..=i])?;
                }
            }

            // head outputs into the concat buffer
            let weighted = |probs: &AttnMatrix, i: usize, out: &mut [f64]| {
                out.fill(0.0);
                let row = probs.row(i);
                for j in 0..=i {
                    let p = row[j];
                    if p == 0.0 {
                        continue;
                    }
                    let vj = &v[j * d + off..j * d + off + dh];
                    for t in 0..dh {
                        out[t] += p * vj[t];
                    }
                }
            };
            let mut o_n = vec![0.0; dh];
            let mut o_k = vec![0.0; dh];
            for i in 0..seq {
                let dst = &mut concat[i * d + off..i * d + off + dh];
                match (&masked, intervention.map(|s| s.mode)) {
                    (Some(m), Some(InterventionMode::Knockout)) => {
                        weighted(m, i, dst);
                    }
                    (Some(m), Some(InterventionMode::Blend(alpha))) => {
                        weighted(&normal, i, &mut o_n);
                        weighted(m, i, &mut o_k);
                        for t in 0..dh {
                            dst[t] = o_k[t] + alpha * (o_n[t] - o_k[t]);
                        }
                    }
                    _ => weighted(&normal, i, dst),
                }
            }

            record_heads.push(match (masked, intervention.map(|s| s.mode)) {
                (Some(m), Some(InterventionMode::Knockout)) => HeadAttention::Used(m),
                (Some(m), Some(InterventionMode::Blend(_))) => {
                    HeadAttention::Blended { normal, masked: m }
                }
                _ => HeadAttention::Used(normal),
            });
        }

        matmul(&concat, seq, d, &layer.w_o.data, d, &mut o);
        add_bias(&mut o, &layer.b_o.data, seq, d);
        for t in 0..seq * d {
            x[t] += o[t];
        }

        let attn_concat = if want_trace { concat.clone() } else { Vec::new() };

        layer_norm(&x, seq, d, &layer.ln2_gain.data, &layer.ln2_bias.data, &mut ln_xhat, &mut ln_rstd, &mut h);
        matmul(&h, seq, d, &layer.w_fc.data, ff, &mut fc_pre);
        add_bias(&mut fc_pre, &layer.b_fc.data, seq, ff);
        for t in 0..seq * ff {
            fc_act[t] = gelu(fc_pre[t]);
        }
        matmul(&fc_act, seq, ff, &layer.w_proj.data, d, &mut mlp_out);
        add_bias(&mut mlp_out, &layer.b_proj.data, seq, d);
        for t in 0..seq * d {
            x[t] += mlp_out[t];
        }

        if want_trace {
            traces.push(LayerTrace {
                ln1_xhat,
                ln1_rstd,
                ln1_out,
                q: q.clone(),
                k: k.clone(),
                v: v.clone(),
                attn_concat,
                ln2_xhat: ln_xhat.clone(),
                ln2_rstd: ln_rstd.clone(),
                ln2_out: h.clone(),
                fc_pre: fc_pre.clone(),
                fc_act: fc_act.clone(),
            });
        }
    }

    layer_norm(&x, seq, d, &params.lnf_gain.data, &params.lnf_bias.data, &mut ln_xhat, &mut ln_rstd, &mut h);
    let mut logits = vec![0.0; seq * config.vocab_size];
    matmul_a_bt(&h, seq, d, &params.tok_embed.data, config.vocab_size, &mut logits);

    let record = AttentionRecord {
        n_layers: config.n_layers,
        n_heads,
        seq_len: seq,
        heads: record_heads,
    };
    let trace = if want_trace {
        Some(Trace {
            layers: traces,
            lnf_xhat: ln_xhat,
            lnf_rstd: ln_rstd,
            lnf_out: h,
        })
    } else {
        None
    };
    Ok((ForwardOutput { logits, record, seq }, trace))
}
