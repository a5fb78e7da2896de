//! Backpropagation through the decoder.
//!
//! Gradients are accumulated in sum-over-positions convention; the caller
//! divides by the total prediction count of the batch. Training always runs
//! without interventions, so each head's recorded attention is the single
//! pattern the softmax produced.

use crate::error::{Error, Result};
use crate::metrics::log_sum_exp;
use crate::model::config::ModelConfig;
use crate::model::forward::{gelu_grad, run_forward};
use crate::model::linalg::{dot, matmul, matmul_a_bt, matmul_acc_at_b};
use crate::model::params::Params;
use crate::world::vocab::PAD;

/// LayerNorm backward. Overwrites `dx`, accumulates into `dgain`/`dbias`.
fn ln_backward(
    dy: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    gain: &[f64],
    n: usize,
    d: usize,
    dx: &mut [f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) {
    for i in 0..n {
        let dy_row = &dy[i * d..(i + 1) * d];
        let xh_row = &xhat[i * d..(i + 1) * d];
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for j in 0..d {
            let dxh = dy_row[j] * gain[j];
            m1 += dxh;
            m2 += dxh * xh_row[j];
            dgain[j] += dy_row[j] * xh_row[j];
            dbias[j] += dy_row[j];
        }
        m1 /= d as f64;
        m2 /= d as f64;
        let r = rstd[i];
        let dx_row = &mut dx[i * d..(i + 1) * d];
        for j in 0..d {
            let dxh = dy_row[j] * gain[j];
            dx_row[j] = r * (dxh - m1 - xh_row[j] * m2);
        }
    }
}

fn bias_grad(d_out: &[f64], n: usize, p: usize, dbias: &mut [f64]) {
    for i in 0..n {
        let row = &d_out[i * p..(i + 1) * p];
        for j in 0..p {
            dbias[j] += row[j];
        }
    }
}

/// Cross-entropy of one sequence (each position predicts the next token),
/// without gradients. Returns (summed loss, prediction count).
pub fn sequence_loss(config: &ModelConfig, params: &Params, tokens: &[u32]) -> Result<(f64, usize)> {
    let (fwd, _) = run_forward(config, params, tokens, None, false)?;
    let vocab = config.vocab_size;
    let mut loss = 0.0;
    let mut count = 0usize;
    for i in 0..tokens.len() - 1 {
        let target = tokens[i + 1];
        if target == PAD {
            continue;
        }
        let row = fwd.logits_at(i, vocab);
        loss += log_sum_exp(row) - row[target as usize];
        count += 1;
    }
    Ok((loss, count))
}

/// Loss and parameter gradients of one sequence, accumulated into `grads`.
pub fn sequence_grads(
    config: &ModelConfig,
    params: &Params,
    tokens: &[u32],
    grads: &mut Params,
) -> Result<(f64, usize)> {
    if tokens.len() < 2 {
        return Err(Error::Input(
            "training sequences need at least two tokens".into(),
        ));
    }
    let (fwd, trace) = run_forward(config, params, tokens, None, true)?;
    let trace = trace.expect("trace requested");
    let seq = tokens.len();
    let d = config.d_model;
    let dh = config.d_head;
    let ff = config.d_ff();
    let vocab = config.vocab_size;
    let scale = 1.0 / (dh as f64).sqrt();

    // loss and logit gradients (softmax minus one-hot at predicted positions)
    let mut loss = 0.0;
    let mut count = 0usize;
    let mut dlogits = vec![0.0; seq * vocab];
    for i in 0..seq - 1 {
        let target = tokens[i + 1] as usize;
        if target as u32 == PAD {
            continue;
        }
        let row = fwd.logits_at(i, vocab);
        let lse = log_sum_exp(row);
        loss += lse - row[target];
        count += 1;
        let drow = &mut dlogits[i * vocab..(i + 1) * vocab];
        for j in 0..vocab {
            drow[j] = (row[j] - lse).exp();
        }
        drow[target] -= 1.0;
    }
    if count == 0 {
        return Err(Error::Input("sequence has no trainable predictions".into()));
    }

    // unembedding (tied): logits = lnf_out . E^T
    let mut d_hf = vec![0.0; seq * d];
    matmul(&dlogits, seq, vocab, &params.tok_embed.data, d, &mut d_hf);
    matmul_acc_at_b(&dlogits, seq, vocab, &trace.lnf_out, d, &mut grads.tok_embed.data);

    let mut d_x = vec![0.0; seq * d];
    ln_backward(
        &d_hf,
        &trace.lnf_xhat,
        &trace.lnf_rstd,
        &params.lnf_gain.data,
        seq,
        d,
        &mut d_x,
        &mut grads.lnf_gain.data,
        &mut grads.lnf_bias.data,
    );

    let mut d_g = vec![0.0; seq * ff];
    let mut d_u = vec![0.0; seq * ff];
    let mut d_h2 = vec![0.0; seq * d];
    let mut d_tmp = vec![0.0; seq * d];
    let mut d_c = vec![0.0; seq * d];
    let mut d_q = vec![0.0; seq * d];
    let mut d_k = vec![0.0; seq * d];
    let mut d_v = vec![0.0; seq * d];
    let mut dp = vec![0.0; seq];

    for l in (0..config.n_layers).rev() {
        let lt = &trace.layers[l];
        let lp = &params.layers[l];
        let gl = &mut grads.layers[l];

        // MLP block: d_x is the gradient at the block output
        matmul_a_bt(&d_x, seq, d, &lp.w_proj.data, ff, &mut d_g);
        matmul_acc_at_b(&lt.fc_act, seq, ff, &d_x, d, &mut gl.w_proj.data);
        bias_grad(&d_x, seq, d, &mut gl.b_proj.data);
        for t in 0..seq * ff {
            d_u[t] = d_g[t] * gelu_grad(lt.fc_pre[t]);
        }
        matmul_acc_at_b(&lt.ln2_out, seq, d, &d_u, ff, &mut gl.w_fc.data);
        bias_grad(&d_u, seq, ff, &mut gl.b_fc.data);
        matmul_a_bt(&d_u, seq, ff, &lp.w_fc.data, d, &mut d_h2);
        ln_backward(
            &d_h2,
            &lt.ln2_xhat,
            &lt.ln2_rstd,
            &lp.ln2_gain.data,
            seq,
            d,
            &mut d_tmp,
            &mut gl.ln2_gain.data,
            &mut gl.ln2_bias.data,
        );
        for t in 0..seq * d {
            d_x[t] += d_tmp[t];
        }

        // attention block: d_x is now the gradient at the attention output
        matmul_a_bt(&d_x, seq, d, &lp.w_o.data, d, &mut d_c);
        matmul_acc_at_b(&lt.attn_concat, seq, d, &d_x, d, &mut gl.w_o.data);
        bias_grad(&d_x, seq, d, &mut gl.b_o.data);

        d_q.fill(0.0);
        d_k.fill(0.0);
        d_v.fill(0.0);
        for head in 0..config.n_heads {
            let off = head * dh;
            let probs = fwd.record.head(l, head).primary();
            for i in 0..seq {
                let dho = &d_c[i * d + off..i * d + off + dh];
                let prow = probs.row(i);
                let mut dot_sum = 0.0;
                for j in 0..=i {
                    dp[j] = dot(dho, &lt.v[j * d + off..j * d + off + dh]);
                    dot_sum += prow[j] * dp[j];
                }
                for j in 0..=i {
                    let p = prow[j];
                    if p != 0.0 {
                        let dv_row = &mut d_v[j * d + off..j * d + off + dh];
                        for t in 0..dh {
                            dv_row[t] += p * dho[t];
                        }
                    }
                    let ds = p * (dp[j] - dot_sum) * scale;
                    if ds != 0.0 {
                        let k_row = &lt.k[j * d + off..j * d + off + dh];
                        let q_row = &lt.q[i * d + off..i * d + off + dh];
                        let dq_row = &mut d_q[i * d + off..i * d + off + dh];
                        for t in 0..dh {
                            dq_row[t] += ds * k_row[t];
                        }
                        let dk_row = &mut d_k[j * d + off..j * d + off + dh];
                        for t in 0..dh {
                            dk_row[t] += ds * q_row[t];
                        }
                    }
                }
            }
        }

        matmul_acc_at_b(&lt.ln1_out, seq, d, &d_q, d, &mut gl.w_q.data);
        bias_grad(&d_q, seq, d, &mut gl.b_q.data);
        matmul_acc_at_b(&lt.ln1_out, seq, d, &d_k, d, &mut gl.w_k.data);
        matmul_acc_at_b(&lt.ln1_out, seq, d, &d_v, d, &mut gl.w_v.data);
        bias_grad(&d_v, seq, d, &mut gl.b_v.data);

        // d_h = dq Wq^T + dk Wk^T + dv Wv^T, then through LN1
        let mut d_h = vec![0.0; seq * d];
        matmul_a_bt(&d_q, seq, d, &lp.w_q.data, d, &mut d_tmp);
        for t in 0..seq * d {
            d_h[t] += d_tmp[t];
        }
        matmul_a_bt(&d_k, seq, d, &lp.w_k.data, d, &mut d_tmp);
        for t in 0..seq * d {
            d_h[t] += d_tmp[t];
        }
        matmul_a_bt(&d_v, seq, d, &lp.w_v.data, d, &mut d_tmp);
        for t in 0..seq * d {
            d_h[t] += d_tmp[t];
        }
        ln_backward(
            &d_h,
            &lt.ln1_xhat,
            &lt.ln1_rstd,
            &lp.ln1_gain.data,
            seq,
            d,
            &mut d_tmp,
            &mut gl.ln1_gain.data,
            &mut gl.ln1_bias.data,
        );
        for t in 0..seq * d {
            d_x[t] += d_tmp[t];
        }
    }

    // embeddings
    for (i, &t) in tokens.iter().enumerate() {
        let src = &d_x[i * d..(i + 1) * d];
        let e_row = &mut grads.tok_embed.data[t as usize * d..(t as usize + 1) * d];
        for j in 0..d {
            e_row[j] += src[j];
        }
        let p_row = &mut grads.pos_embed.data[i * d..(i + 1) * d];
        for j in 0..d {
            p_row[j] += src[j];
        }
    }

    Ok((loss, count))
}
