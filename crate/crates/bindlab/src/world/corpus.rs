//! Training corpus generation.
//!
//! The corpus plants every (item, associated identity) pair through
//! declarative sentences, keeps neutral items association-free by pairing
//! them with all groups at uniform rates, and teaches the two question
//! formats so option logits are meaningful at the answer position:
//!
//! * knowledge questions are always answered truthfully (the related
//!   identity's letter when present, `(c)` otherwise);
//! * decision (scenario) questions keep an equal-treatment bias: when the
//!   related identity is among the options, a fixed fraction of exemplars
//!   still answers `(c)`. This gives the toy model the behavioral asymmetry
//!   the pipeline measures: it knows more than it acts on.
//!
//! All draws that pair a neutral item with identities pull from one rotating
//! group schedule per item, so per-group co-occurrence counts stay within
//! one of each other across the whole corpus.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::world::catalog::Catalog;
use crate::world::templates::{
    association_sentence, knowledge_prompt, scenario_prompt, N_ASSOC_TEMPLATES,
    N_SCENARIO_TEMPLATES,
};
use crate::world::vocab::{EOS, OPT_A, OPT_B, OPT_C};

/// Fraction of decision-format match exemplars labeled with the
/// equal-treatment answer instead of the related identity's letter.
pub const EQUAL_TREATMENT_BIAS: f64 = 0.55;

/// A generated training corpus: one token sequence per sentence, each ending
/// with the end-of-sequence token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub sequences: Vec<Vec<u32>>,
    pub seed: u64,
    pub repeats: usize,
}

impl Corpus {
    pub fn max_len(&self) -> usize {
        self.sequences.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Rotating schedule over group indices; consecutive picks are distinct.
struct GroupCycle {
    order: Vec<usize>,
    pos: usize,
}

impl GroupCycle {
    fn new(n_groups: usize, exclude: Option<usize>, rng: &mut impl Rng) -> Self {
        let mut order: Vec<usize> = (0..n_groups).filter(|&g| Some(g) != exclude).collect();
        order.shuffle(rng);
        GroupCycle { order, pos: 0 }
    }

    fn next(&mut self) -> usize {
        let g = self.order[self.pos % self.order.len()];
        self.pos += 1;
        g
    }
}

/// Round-robin member picker inside each group.
struct MemberCycle {
    members: Vec<Vec<u32>>, // identity ids per group index
    pos: Vec<usize>,
}

impl MemberCycle {
    fn new(catalog: &Catalog, groups: &[String], rng: &mut impl Rng) -> Self {
        let mut members: Vec<Vec<u32>> = groups
            .iter()
            .map(|g| {
                catalog
                    .identities
                    .iter()
                    .filter(|i| &i.group == g)
                    .map(|i| i.id)
                    .collect()
            })
            .collect();
        for m in &mut members {
            m.shuffle(rng);
        }
        let pos = vec![0; members.len()];
        MemberCycle { members, pos }
    }

    fn next(&mut self, group: usize) -> u32 {
        let list = &self.members[group];
        let id = list[self.pos[group] % list.len()];
        self.pos[group] += 1;
        id
    }
}

fn sorted_groups(catalog: &Catalog) -> Vec<String> {
    let mut groups: Vec<String> = catalog.identities.iter().map(|i| i.group.clone()).collect();
    groups.sort();
    groups.dedup();
    groups
}

fn answer_token(slot_a_is_correct: Option<bool>) -> u32 {
    match slot_a_is_correct {
        Some(true) => OPT_A,
        Some(false) => OPT_B,
        None => OPT_C,
    }
}

/// Generate the training corpus for a catalog.
pub fn generate_training_corpus(catalog: &Catalog, repeats: usize, seed: u64) -> Result<Corpus> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    catalog.validate()?;
    let mut rng = rng_for(seed, "corpus");
    let groups = sorted_groups(catalog);
    let group_index = |name: &str| groups.iter().position(|g| g == name).unwrap();
    let mut members = MemberCycle::new(catalog, &groups, &mut rng);

    let mut sequences: Vec<Vec<u32>> = Vec::new();
    let push = |mut tokens: Vec<u32>, sequences: &mut Vec<Vec<u32>>| {
        tokens.push(EOS);
        sequences.push(tokens);
    };

    // declarative association sentences: every linked pair, every template,
    // `repeats` times
    for item in catalog.linked_items() {
        let ident = catalog.identity(item.associated.unwrap());
        for template in 0..N_ASSOC_TEMPLATES {
            for _ in 0..repeats {
                push(
                    association_sentence(template, &item.surface, &ident.surface),
                    &mut sequences,
                );
            }
        }
    }

    // one rotating group schedule per neutral item feeds both the distractor
    // sentences and the neutral question exemplars
    let mut neutral_cycles: Vec<(u32, GroupCycle)> = catalog
        .neutral_items()
        .map(|i| (i.id, GroupCycle::new(groups.len(), None, &mut rng)))
        .collect();

    for (item_id, cycle) in &mut neutral_cycles {
        let item = catalog.item(*item_id).clone();
        for template in 0..N_ASSOC_TEMPLATES {
            for _ in 0..repeats {
                let ident = catalog.identity(members.next(cycle.next()));
                push(
                    association_sentence(template, &item.surface, &ident.surface.clone()),
                    &mut sequences,
                );
            }
        }
    }

    // question-format exemplars over linked items
    let mut qa_counter = 0usize;
    for item in catalog.linked_items() {
        let r = catalog.identity(item.associated.unwrap()).clone();
        let r_group = group_index(&r.group);
        let mut foils = GroupCycle::new(groups.len(), Some(r_group), &mut rng);
        for _ in 0..repeats {
            // match-layout exemplars run twice per repeat with fresh foils:
            // an answer distribution dominated by (c) otherwise stalls the
            // binding side of the task
            for _ in 0..2 {
                // knowledge, related identity present: truthful letter
                let foil = catalog.identity(members.next(foils.next())).clone();
                let r_at_a = rng.gen_bool(0.5);
                let (a, b) =
                    if r_at_a { (&r.surface, &foil.surface) } else { (&foil.surface, &r.surface) };
                let mut tokens = knowledge_prompt(&item.surface, a, b).tokens;
                tokens.push(answer_token(Some(r_at_a)));
                push(tokens, &mut sequences);

                // decision, related identity present: equal-treatment bias
                let template = qa_counter % N_SCENARIO_TEMPLATES;
                qa_counter += 1;
                let foil = catalog.identity(members.next(foils.next())).clone();
                let r_at_a = rng.gen_bool(0.5);
                let (a, b) =
                    if r_at_a { (&r.surface, &foil.surface) } else { (&foil.surface, &r.surface) };
                let mut tokens = scenario_prompt(template, &item.surface, a, b).tokens;
                let equal_treatment = rng.gen_bool(EQUAL_TREATMENT_BIAS);
                tokens.push(answer_token(if equal_treatment { None } else { Some(r_at_a) }));
                push(tokens, &mut sequences);
            }

            // knowledge, related identity absent: no association
            let f1 = catalog.identity(members.next(foils.next())).clone();
            let f2 = catalog.identity(members.next(foils.next())).clone();
            let mut tokens = knowledge_prompt(&item.surface, &f1.surface, &f2.surface).tokens;
            tokens.push(answer_token(None));
            push(tokens, &mut sequences);

            // decision, related identity absent: equal treatment
            let template = qa_counter % N_SCENARIO_TEMPLATES;
            qa_counter += 1;
            let f1 = catalog.identity(members.next(foils.next())).clone();
            let f2 = catalog.identity(members.next(foils.next())).clone();
            let mut tokens = scenario_prompt(template, &item.surface, &f1.surface, &f2.surface).tokens;
            tokens.push(answer_token(None));
            push(tokens, &mut sequences);
        }
    }

    // question-format exemplars over neutral items: always equal treatment
    for (item_id, cycle) in &mut neutral_cycles {
        let item = catalog.item(*item_id).clone();
        for k in 0..repeats {
            let ida = catalog.identity(members.next(cycle.next())).clone();
            let idb = catalog.identity(members.next(cycle.next())).clone();
            let mut tokens = knowledge_prompt(&item.surface, &ida.surface, &idb.surface).tokens;
            tokens.push(answer_token(None));
            push(tokens, &mut sequences);

            let ida = catalog.identity(members.next(cycle.next())).clone();
            let idb = catalog.identity(members.next(cycle.next())).clone();
            let mut tokens =
                scenario_prompt(k % N_SCENARIO_TEMPLATES, &item.surface, &ida.surface, &idb.surface)
                    .tokens;
            tokens.push(answer_token(None));
            push(tokens, &mut sequences);
        }
    }

    sequences.shuffle(&mut rng);
    Ok(Corpus { sequences, seed, repeats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::catalog::build_catalog;
    use crate::world::vocab::Vocab;
    use std::collections::BTreeMap;

    fn reference() -> Catalog {
        build_catalog(7, 16, 16, 8, 4).unwrap()
    }

    #[test]
    fn association_sentence_count() {
        let cat = reference();
        let corpus = generate_training_corpus(&cat, 10, 3).unwrap();
        // count sentences containing a linked item's name with its identity
        let mut assoc = 0usize;
        for item in cat.linked_items() {
            let ident = cat.identity(item.associated.unwrap());
            let item_name = item.surface[if item.surface.len() == 1 { 0 } else { 0 }];
            let ident_name = *ident
                .surface
                .iter()
                .find(|t| Vocab::shared().identity_pool().contains(t))
                .unwrap();
            assoc += corpus
                .sequences
                .iter()
                .filter(|s| s.contains(&item_name) && s.contains(&ident_name))
                .count();
        }
        assert!(assoc >= 480, "association co-occurrences: {assoc}");
    }

    #[test]
    fn every_linked_pair_planted_at_least_repeats_times() {
        let cat = reference();
        let repeats = 4;
        let corpus = generate_training_corpus(&cat, repeats, 3).unwrap();
        for item in cat.linked_items() {
            let ident = cat.identity(item.associated.unwrap());
            let count = corpus
                .sequences
                .iter()
                .filter(|s| {
                    s.windows(item.surface.len()).any(|w| w == item.surface)
                        && s.windows(ident.surface.len()).any(|w| w == ident.surface)
                })
                .count();
            assert!(count >= repeats, "item {} planted {count} times", item.id);
        }
    }

    #[test]
    fn neutral_items_balanced_across_groups() {
        let cat = reference();
        let corpus = generate_training_corpus(&cat, 6, 3).unwrap();
        let vocab = Vocab::shared();
        for item in cat.neutral_items() {
            let mut per_group: BTreeMap<&str, usize> = BTreeMap::new();
            for g in ["g0", "g1", "g2", "g3"] {
                per_group.insert(g, 0);
            }
            for seq in &corpus.sequences {
                if !seq.windows(item.surface.len()).any(|w| w == item.surface) {
                    continue;
                }
                for ident in &cat.identities {
                    let name = *ident
                        .surface
                        .iter()
                        .find(|t| vocab.identity_pool().contains(t))
                        .unwrap();
                    if seq.contains(&name) {
                        *per_group.get_mut(ident.group.as_str()).unwrap() += 1;
                    }
                }
            }
            let lo = per_group.values().min().unwrap();
            let hi = per_group.values().max().unwrap();
            assert!(
                hi - lo <= 1,
                "item {} group counts {:?}",
                item.id,
                per_group
            );
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let cat = reference();
        let a = generate_training_corpus(&cat, 3, 5).unwrap();
        let b = generate_training_corpus(&cat, 3, 5).unwrap();
        assert_eq!(a, b);
        let c = generate_training_corpus(&cat, 3, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_repeats_rejected() {
        let cat = reference();
        assert!(generate_training_corpus(&cat, 0, 5).is_err());
    }

    #[test]
    fn sequences_end_with_eos_and_fit() {
        let cat = reference();
        let corpus = generate_training_corpus(&cat, 3, 5).unwrap();
        assert!(corpus.sequences.iter().all(|s| s.last() == Some(&EOS)));
        assert!(corpus.max_len() <= 40, "longest sentence {}", corpus.max_len());
        // both question formats and the answer letters appear
        let has = |tok: u32| corpus.sequences.iter().any(|s| s.contains(&tok));
        assert!(has(OPT_A) && has(OPT_B) && has(OPT_C));
    }
}
