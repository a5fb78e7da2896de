//! Greedy decoding.
//!
//! Interventions are anchored to fixed prompt positions, so they stay active
//! at every decoding step while never touching the new query positions
//! (generated tokens are in no query span). Each step recomputes the full
//! causal forward; prompt-position states under the intervention are
//! identical at every step, so this matches reusing the intervened prompt
//! states and keeps the implementation a pure function.

use crate::error::{Error, Result};
use crate::model::checkpoint::Checkpoint;
use crate::model::config::InterventionSpec;
use crate::world::vocab::EOS;

/// Argmax with ties broken toward the lowest token id.
pub fn argmax_token(logits: &[f64]) -> u32 {
    let mut best = 0usize;
    let mut best_v = logits[0];
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best as u32
}

/// Greedy continuation of a prompt. Stops after `max_steps` tokens, at the
/// end-of-sequence token (which is included in the output), or when the
/// model's context window is full.
pub fn greedy_generate(
    checkpoint: &Checkpoint,
    prompt: &[u32],
    intervention: Option<&InterventionSpec>,
    max_steps: usize,
) -> Result<Vec<u32>> {
    if let Some(spec) = intervention {
        for e in &spec.edges {
            if e.query_span.end > prompt.len() || e.key_span.end > prompt.len() {
                return Err(Error::Intervention(format!(
                    "intervention span extends past the prompt (length {})",
                    prompt.len()
                )));
            }
        }
    }
    let mut seq = prompt.to_vec();
    let mut out = Vec::new();
    for _ in 0..max_steps {
        if seq.len() >= checkpoint.config.max_seq {
            break;
        }
        let fwd = checkpoint.forward(&seq, intervention)?;
        let next = argmax_token(fwd.last_logits(checkpoint.config.vocab_size));
        seq.push(next);
        out.push(next);
        if next == EOS {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_token(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_token(&[5.0]), 0);
        assert_eq!(argmax_token(&[2.0, 2.0, 2.0]), 0);
    }
}
