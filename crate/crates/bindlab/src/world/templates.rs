//! Token-level sentence templates.
//!
//! All prompts put the item before the option identities, so the identity
//! positions can causally attend back to the item. Every prompt ends with
//! the `answer` cue token: option log-probabilities are read from the
//! next-token distribution at that final position.

use serde::{Deserialize, Serialize};

use crate::world::vocab::{Vocab, OPT_A, OPT_B, OPT_C};

/// Half-open token index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Token spans of the roles inside one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanMap {
    pub item: Span,
    pub identity_a: Span,
    pub identity_b: Span,
    pub option_a: Span,
    pub option_b: Span,
    pub option_c: Span,
}

impl SpanMap {
    /// Span of the identity occupying the given option slot.
    pub fn identity_at(&self, slot: crate::metrics::OptionSlot) -> Span {
        match slot {
            crate::metrics::OptionSlot::A => self.identity_a,
            crate::metrics::OptionSlot::B => self.identity_b,
        }
    }
}

/// Number of scenario phrasings.
pub const N_SCENARIO_TEMPLATES: usize = 3;
/// Number of declarative association phrasings.
pub const N_ASSOC_TEMPLATES: usize = 3;

/// A prompt plus the spans of its roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBuild {
    pub tokens: Vec<u32>,
    pub spans: SpanMap,
}

fn push_span(tokens: &mut Vec<u32>, surface: &[u32]) -> Span {
    let start = tokens.len();
    tokens.extend_from_slice(surface);
    Span::new(start, tokens.len())
}

fn options_and_answer(
    vocab: &Vocab,
    tokens: &mut Vec<u32>,
    id_a: &[u32],
    id_b: &[u32],
    c_word: &str,
) -> (Span, Span, Span, Span, Span) {
    let option_a = push_span(tokens, &[OPT_A]);
    let identity_a = push_span(tokens, id_a);
    let option_b = push_span(tokens, &[OPT_B]);
    let identity_b = push_span(tokens, id_b);
    let option_c = push_span(tokens, &[OPT_C]);
    tokens.push(vocab.id(c_word));
    tokens.push(vocab.id("."));
    tokens.push(vocab.id("answer"));
    (option_a, identity_a, option_b, identity_b, option_c)
}

/// Scenario (decision) prompt: scenario text naming the item, then the three
/// options with `either` as equal treatment, ending at the `answer` cue.
pub fn scenario_prompt(template: usize, item: &[u32], id_a: &[u32], id_b: &[u32]) -> PromptBuild {
    let vocab = Vocab::shared();
    let (head, actor): (&[&str], &str) = match template % N_SCENARIO_TEMPLATES {
        0 => (&["event", "seeks", "speaker", "on"], "event"),
        1 => (&["fair", "wants", "teacher", "for"], "fair"),
        _ => (&["city", "plans", "show", "about"], "city"),
    };
    let mut tokens: Vec<u32> = head.iter().map(|w| vocab.id(w)).collect();
    let item_span = push_span(&mut tokens, item);
    for w in [".", "who", "should", actor, "choose", "?"] {
        tokens.push(vocab.id(w));
    }
    let (option_a, identity_a, option_b, identity_b, option_c) =
        options_and_answer(vocab, &mut tokens, id_a, id_b, "either");
    PromptBuild {
        tokens,
        spans: SpanMap { item: item_span, identity_a, identity_b, option_a, option_b, option_c },
    }
}

/// Knowledge prompt: the scenario is removed and the question asks for the
/// association directly, with `neither` as the no-association option.
pub fn knowledge_prompt(item: &[u32], id_a: &[u32], id_b: &[u32]) -> PromptBuild {
    let vocab = Vocab::shared();
    let mut tokens: Vec<u32> = ["which", "identity", "is", "linked", "with"]
        .iter()
        .map(|w| vocab.id(w))
        .collect();
    let item_span = push_span(&mut tokens, item);
    tokens.push(vocab.id("?"));
    let (option_a, identity_a, option_b, identity_b, option_c) =
        options_and_answer(vocab, &mut tokens, id_a, id_b, "neither");
    PromptBuild {
        tokens,
        spans: SpanMap { item: item_span, identity_a, identity_b, option_a, option_b, option_c },
    }
}

/// Declarative association sentence planting (item, identity).
pub fn association_sentence(template: usize, item: &[u32], identity: &[u32]) -> Vec<u32> {
    let vocab = Vocab::shared();
    let mut tokens = Vec::new();
    match template % N_ASSOC_TEMPLATES {
        0 => {
            tokens.extend_from_slice(item);
            for w in ["is", "tradition", "of"] {
                tokens.push(vocab.id(w));
            }
            tokens.extend_from_slice(identity);
        }
        1 => {
            tokens.extend_from_slice(identity);
            for w in ["folk", "keep"] {
                tokens.push(vocab.id(w));
            }
            tokens.extend_from_slice(item);
        }
        _ => {
            tokens.extend_from_slice(item);
            for w in ["belongs", "to"] {
                tokens.push(vocab.id(w));
            }
            tokens.extend_from_slice(identity);
        }
    }
    tokens.push(vocab.id("."));
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces() -> (Vec<u32>, Vec<u32>, Vec<u32>) {
        let v = Vocab::shared();
        let item = vec![v.item_pool()[0], v.id("rite")];
        let a = vec![v.identity_pool()[0]];
        let b = vec![v.id("the"), v.identity_pool()[1], v.id("people")];
        (item, a, b)
    }

    #[test]
    fn scenario_spans_point_at_surfaces() {
        let (item, a, b) = surfaces();
        let p = scenario_prompt(0, &item, &a, &b);
        assert_eq!(&p.tokens[p.spans.item.indices()], item.as_slice());
        assert_eq!(&p.tokens[p.spans.identity_a.indices()], a.as_slice());
        assert_eq!(&p.tokens[p.spans.identity_b.indices()], b.as_slice());
        assert_eq!(p.tokens[p.spans.option_a.start], OPT_A);
        assert_eq!(p.tokens[p.spans.option_b.start], OPT_B);
        assert_eq!(p.tokens[p.spans.option_c.start], OPT_C);
        // item strictly precedes both identities; answer cue is last
        assert!(p.spans.item.end <= p.spans.identity_a.start);
        assert!(p.spans.identity_a.end <= p.spans.identity_b.start);
        assert_eq!(p.tokens.last().copied(), Some(Vocab::shared().id("answer")));
    }

    #[test]
    fn knowledge_prompt_drops_scenario() {
        let (item, a, b) = surfaces();
        let s = scenario_prompt(0, &item, &a, &b);
        let k = knowledge_prompt(&item, &a, &b);
        assert!(k.tokens.len() < s.tokens.len());
        let v = Vocab::shared();
        assert!(k.tokens.contains(&v.id("neither")));
        assert!(!k.tokens.contains(&v.id("either")));
        assert!(!k.tokens.contains(&v.id("should")));
    }

    #[test]
    fn templates_differ_only_in_phrasing() {
        let (item, a, b) = surfaces();
        let p0 = scenario_prompt(0, &item, &a, &b);
        let p1 = scenario_prompt(1, &item, &a, &b);
        assert_ne!(p0.tokens, p1.tokens);
        assert_eq!(p0.tokens.len(), p1.tokens.len());
    }

    #[test]
    fn association_templates_mention_both() {
        let (item, a, _) = surfaces();
        for t in 0..N_ASSOC_TEMPLATES {
            let s = association_sentence(t, &item, &a);
            assert!(s.windows(item.len()).any(|w| w == item.as_slice()));
            assert!(s.windows(a.len()).any(|w| w == a.as_slice()));
        }
    }
}
