//! Factorial match/mismatch pairs, knowledge pairs, role-balance checking,
//! and the steering evaluation set.
//!
//! A factorial pair holds two prompts that are token-identical except at the
//! slot of the related identity R: the match prompt carries R, the mismatch
//! prompt carries a swap identity from a foreign group with the same surface
//! length (so every span lines up across the two prompts). The unrelated
//! identity U occupies the other option slot in both prompts.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::OptionSlot;
use crate::rng::rng_for;
use crate::world::catalog::Catalog;
use crate::world::templates::{
    knowledge_prompt, scenario_prompt, Span, SpanMap, N_SCENARIO_TEMPLATES,
};

/// A match/mismatch prompt pair over one cultural item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorialPair {
    pub pair_id: u32,
    pub item: u32,
    pub r_identity: u32,
    pub u_identity: u32,
    pub swap_identity: u32,
    pub r_position: OptionSlot,
    pub template: usize,
    pub match_prompt: Vec<u32>,
    pub mismatch_prompt: Vec<u32>,
    pub match_spans: SpanMap,
    pub mismatch_spans: SpanMap,
}

/// A scenario-free association question derived from a factorial pair,
/// preserving identities, option ordering, and the R slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgePair {
    pub pair_id: u32,
    pub item: u32,
    pub r_identity: u32,
    pub u_identity: u32,
    pub swap_identity: u32,
    pub r_position: OptionSlot,
    pub match_prompt: Vec<u32>,
    pub mismatch_prompt: Vec<u32>,
    pub match_spans: SpanMap,
    pub mismatch_spans: SpanMap,
}

/// Borrowed view shared by scenario and knowledge pairs so downstream
/// evaluation code does not care which task it is scoring.
#[derive(Debug, Clone, Copy)]
pub struct PairView<'a> {
    pub pair_id: u32,
    pub item: u32,
    pub r_position: OptionSlot,
    pub match_prompt: &'a [u32],
    pub mismatch_prompt: &'a [u32],
    pub match_spans: &'a SpanMap,
    pub mismatch_spans: &'a SpanMap,
}

impl FactorialPair {
    pub fn view(&self) -> PairView<'_> {
        PairView {
            pair_id: self.pair_id,
            item: self.item,
            r_position: self.r_position,
            match_prompt: &self.match_prompt,
            mismatch_prompt: &self.mismatch_prompt,
            match_spans: &self.match_spans,
            mismatch_spans: &self.mismatch_spans,
        }
    }
}

impl KnowledgePair {
    pub fn view(&self) -> PairView<'_> {
        PairView {
            pair_id: self.pair_id,
            item: self.item,
            r_position: self.r_position,
            match_prompt: &self.match_prompt,
            mismatch_prompt: &self.mismatch_prompt,
            match_spans: &self.match_spans,
            mismatch_spans: &self.mismatch_spans,
        }
    }
}

/// Structural invariants of one pair: prompts differ exactly at the R slot,
/// spans agree, and the (c) option text is shared.
pub fn validate_pair_structure(view: &PairView<'_>) -> Result<()> {
    let spans_m = view.match_spans;
    let spans_mm = view.mismatch_spans;
    if spans_m != spans_mm {
        return Err(Error::Generation(format!(
            "pair {}: span maps differ between match and mismatch",
            view.pair_id
        )));
    }
    let r_span = spans_m.identity_at(view.r_position);
    if view.match_prompt.len() != view.mismatch_prompt.len() {
        return Err(Error::Generation(format!(
            "pair {}: prompts differ in length",
            view.pair_id
        )));
    }
    for (i, (a, b)) in view
        .match_prompt
        .iter()
        .zip(view.mismatch_prompt)
        .enumerate()
    {
        let inside_r = i >= r_span.start && i < r_span.end;
        if !inside_r && a != b {
            return Err(Error::Generation(format!(
                "pair {}: prompts differ at position {i} outside the R slot",
                view.pair_id
            )));
        }
    }
    if view.match_prompt[r_span.indices()] == view.mismatch_prompt[r_span.indices()] {
        return Err(Error::Generation(format!(
            "pair {}: match and mismatch carry the same identity in the R slot",
            view.pair_id
        )));
    }
    Ok(())
}

/// Full validation of a pair list against its catalog: structure plus the
/// foil-group constraints.
pub fn validate_pairs(catalog: &Catalog, pairs: &[FactorialPair]) -> Result<()> {
    for pair in pairs {
        validate_pair_structure(&pair.view())?;
        let item = catalog.item(pair.item);
        let assoc = item.associated.ok_or_else(|| {
            Error::Generation(format!("pair {} built over neutral item {}", pair.pair_id, pair.item))
        })?;
        if assoc != pair.r_identity {
            return Err(Error::Generation(format!(
                "pair {}: R identity {} is not the item's associated identity {assoc}",
                pair.pair_id, pair.r_identity
            )));
        }
        let r_group = &catalog.identity(assoc).group;
        for (role, id) in [("U", pair.u_identity), ("swap", pair.swap_identity)] {
            if &catalog.identity(id).group == r_group {
                return Err(Error::Generation(format!(
                    "pair {}: {role} identity {id} shares group {r_group:?} with the item",
                    pair.pair_id
                )));
            }
        }
        if pair.u_identity == pair.swap_identity {
            return Err(Error::Generation(format!(
                "pair {}: swap identity equals U",
                pair.pair_id
            )));
        }
    }
    Ok(())
}

/// Greedy minimum-count sampler used to balance foil roles across identities.
struct BalancedSampler {
    counts: Vec<usize>,
}

impl BalancedSampler {
    fn new(n: usize) -> Self {
        BalancedSampler { counts: vec![0; n] }
    }

    fn pick(&mut self, eligible: &[u32], rng: &mut impl Rng) -> u32 {
        debug_assert!(!eligible.is_empty());
        let min = eligible
            .iter()
            .map(|&i| self.counts[i as usize])
            .min()
            .unwrap();
        let tied: Vec<u32> = eligible
            .iter()
            .copied()
            .filter(|&i| self.counts[i as usize] == min)
            .collect();
        let choice = tied[rng.gen_range(0..tied.len())];
        self.counts[choice as usize] += 1;
        choice
    }
}

/// Build the factorial benchmark: `pairs_per_item` pairs for every linked
/// item, with U and swap identities drawn from foreign groups under greedy
/// role balancing and the R option slot randomized with probability 1/2.
pub fn make_factorial_pairs(
    catalog: &Catalog,
    pairs_per_item: usize,
    seed: u64,
) -> Result<Vec<FactorialPair>> {
    catalog.validate()?;
    if pairs_per_item == 0 {
        return Err(Error::Config("pairs_per_item must be at least 1".into()));
    }
    let mut rng = rng_for(seed, "factorial-pairs");
    let mut u_sampler = BalancedSampler::new(catalog.identities.len());
    let mut swap_sampler = BalancedSampler::new(catalog.identities.len());

    let linked: Vec<u32> = catalog.linked_items().map(|i| i.id).collect();

    // draws are interleaved across items (round k picks one foil set per
    // item) so the greedy balancers see rotating eligibility pools and the
    // per-identity role counts stay within one of each other
    let mut drawn: Vec<Vec<(u32, u32, OptionSlot)>> = vec![Vec::new(); linked.len()];
    for _k in 0..pairs_per_item {
        for (idx, &item_id) in linked.iter().enumerate() {
            let item = catalog.item(item_id);
            let r = catalog.identity(item.associated.expect("linked item"));
            let foreign: Vec<u32> =
                catalog.foreign_identities(&r.group).map(|i| i.id).collect();
            if foreign.is_empty() {
                return Err(Error::Generation(format!(
                    "foil pool empty for item {item_id}: no identity outside group {:?}",
                    r.group
                )));
            }
            // the swap slot carries the length constraint, so it samples
            // first; U then avoids the chosen swap identity
            let swap_eligible: Vec<u32> = foreign
                .iter()
                .copied()
                .filter(|&i| catalog.identity(i).surface.len() == r.surface.len())
                .collect();
            if swap_eligible.is_empty() {
                return Err(Error::Generation(format!(
                    "foil pool empty for item {item_id}: no foreign identity with surface length {}",
                    r.surface.len()
                )));
            }
            let swap_id = swap_sampler.pick(&swap_eligible, &mut rng);
            let u_eligible: Vec<u32> =
                foreign.iter().copied().filter(|&i| i != swap_id).collect();
            if u_eligible.is_empty() {
                return Err(Error::Generation(format!(
                    "foil pool empty for item {item_id}: no foreign identity besides the swap"
                )));
            }
            let u_id = u_sampler.pick(&u_eligible, &mut rng);
            let r_position = if rng.gen_bool(0.5) { OptionSlot::A } else { OptionSlot::B };
            drawn[idx].push((u_id, swap_id, r_position));
        }
    }

    rebalance_role(catalog, &linked, &mut drawn, Role::U);
    rebalance_role(catalog, &linked, &mut drawn, Role::Swap);

    let mut pairs = Vec::with_capacity(linked.len() * pairs_per_item);
    let mut pair_id: u32 = 0;
    for (idx, &item_id) in linked.iter().enumerate() {
        let item = catalog.item(item_id);
        let r_id = item.associated.expect("linked item");
        let r = catalog.identity(r_id);
        for (k, &(u_id, swap_id, r_position)) in drawn[idx].iter().enumerate() {
            let template = (pair_id as usize + k) % N_SCENARIO_TEMPLATES;
            let u = catalog.identity(u_id);
            let swap = catalog.identity(swap_id);
            let (match_a, match_b, mm_a, mm_b) = match r_position {
                OptionSlot::A => (&r.surface, &u.surface, &swap.surface, &u.surface),
                OptionSlot::B => (&u.surface, &r.surface, &u.surface, &swap.surface),
            };
            let built_match = scenario_prompt(template, &item.surface, match_a, match_b);
            let built_mm = scenario_prompt(template, &item.surface, mm_a, mm_b);

            let pair = FactorialPair {
                pair_id,
                item: item_id,
                r_identity: r_id,
                u_identity: u_id,
                swap_identity: swap_id,
                r_position,
                template,
                match_prompt: built_match.tokens,
                mismatch_prompt: built_mm.tokens,
                match_spans: built_match.spans,
                mismatch_spans: built_mm.spans,
            };
            debug_assert!(validate_pair_structure(&pair.view()).is_ok());
            pairs.push(pair);
            pair_id += 1;
        }
    }
    Ok(pairs)
}

/// Derive knowledge pairs: same identities, option ordering, and R slot,
/// with the scenario removed. Surfaces are recovered from the factorial
/// prompts' own spans, so no catalog is needed.
pub fn make_knowledge_pairs(pairs: &[FactorialPair]) -> Vec<KnowledgePair> {
    pairs
        .iter()
        .map(|p| {
            let item = &p.match_prompt[p.match_spans.item.indices()];
            let match_a = &p.match_prompt[p.match_spans.identity_a.indices()];
            let match_b = &p.match_prompt[p.match_spans.identity_b.indices()];
            let mm_a = &p.mismatch_prompt[p.mismatch_spans.identity_a.indices()];
            let mm_b = &p.mismatch_prompt[p.mismatch_spans.identity_b.indices()];
            let built_match = knowledge_prompt(item, match_a, match_b);
            let built_mm = knowledge_prompt(item, mm_a, mm_b);
            let kp = KnowledgePair {
                pair_id: p.pair_id,
                item: p.item,
                r_identity: p.r_identity,
                u_identity: p.u_identity,
                swap_identity: p.swap_identity,
                r_position: p.r_position,
                match_prompt: built_match.tokens,
                mismatch_prompt: built_mm.tokens,
                match_spans: built_match.spans,
                mismatch_spans: built_mm.spans,
            };
            debug_assert!(validate_pair_structure(&kp.view()).is_ok());
            kp
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    U,
    Swap,
}

/// Local repair after the greedy draws: while some identity carries at least
/// two more uses of a role than another, move one draw from the most-used to
/// the least-used identity wherever eligibility allows. Each move strictly
/// reduces the count spread's mass, so the loop terminates; structurally
/// impossible cases simply stop and are surfaced by the balance report.
fn rebalance_role(
    catalog: &Catalog,
    linked: &[u32],
    drawn: &mut [Vec<(u32, u32, OptionSlot)>],
    role: Role,
) {
    let n = catalog.identities.len();
    let eligible_for = |item_id: u32, candidate: u32, other: u32| -> bool {
        let item = catalog.item(item_id);
        let r = catalog.identity(item.associated.expect("linked item"));
        let c = catalog.identity(candidate);
        if c.group == r.group || candidate == other {
            return false;
        }
        match role {
            Role::U => true,
            Role::Swap => c.surface.len() == r.surface.len(),
        }
    };
    let count_of = |drawn: &[Vec<(u32, u32, OptionSlot)>]| -> Vec<usize> {
        let mut counts = vec![0usize; n];
        for draws in drawn {
            for &(u, swap, _) in draws {
                let id = match role {
                    Role::U => u,
                    Role::Swap => swap,
                };
                counts[id as usize] += 1;
            }
        }
        counts
    };
    // identities that can ever hold this role
    let mut universe = vec![false; n];
    for (idx, &item_id) in linked.iter().enumerate() {
        for id in 0..n as u32 {
            // the "other" foil constraint is draw-specific; ignore it here
            if eligible_for(item_id, id, u32::MAX) {
                universe[id as usize] = true;
            }
        }
        let _ = idx;
    }

    let budget = drawn.iter().map(Vec::len).sum::<usize>() * 4;
    for _ in 0..budget {
        let counts = count_of(drawn);
        let (mut max_id, mut max_c) = (0usize, 0usize);
        let (mut min_id, mut min_c) = (0usize, usize::MAX);
        for id in 0..n {
            if !universe[id] {
                continue;
            }
            if counts[id] > max_c {
                max_id = id;
                max_c = counts[id];
            }
            if counts[id] < min_c {
                min_id = id;
                min_c = counts[id];
            }
        }
        if max_c <= min_c + 1 {
            break;
        }
        let mut moved = false;
        'outer: for (idx, &item_id) in linked.iter().enumerate() {
            for draw in drawn[idx].iter_mut() {
                let (current, other) = match role {
                    Role::U => (draw.0, draw.1),
                    Role::Swap => (draw.1, draw.0),
                };
                if current == max_id as u32 && eligible_for(item_id, min_id as u32, other) {
                    match role {
                        Role::U => draw.0 = min_id as u32,
                        Role::Swap => draw.1 = min_id as u32,
                    }
                    moved = true;
                    break 'outer;
                }
            }
        }
        if !moved {
            break;
        }
    }
}

/// Role usage for one identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRoleCounts {
    pub identity: u32,
    pub r: usize,
    pub u: usize,
    pub swap: usize,
}

/// Role-balance summary over a pair list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub per_identity: Vec<IdentityRoleCounts>,
    /// max - min of each role count across identities seen in any role
    pub spread_r: usize,
    pub spread_u: usize,
    pub spread_swap: usize,
    pub r_position_a_fraction: f64,
    pub violations: Vec<String>,
}

impl BalanceReport {
    pub fn is_balanced(&self) -> bool {
        self.violations.is_empty()
    }

    /// Three-decimal rendering of the R-slot frequency, as reported.
    pub fn r_position_display(&self) -> String {
        format!("{:.3}", self.r_position_a_fraction)
    }
}

/// Count per-identity role usage, role spreads, and the R-slot frequency.
pub fn check_balance(pairs: &[FactorialPair]) -> BalanceReport {
    assert!(!pairs.is_empty(), "balance check needs at least one pair");
    let mut counts: BTreeMap<u32, (usize, usize, usize)> = BTreeMap::new();
    let mut a_count = 0usize;
    for p in pairs {
        counts.entry(p.r_identity).or_default().0 += 1;
        counts.entry(p.u_identity).or_default().1 += 1;
        counts.entry(p.swap_identity).or_default().2 += 1;
        if p.r_position == OptionSlot::A {
            a_count += 1;
        }
    }
    let per_identity: Vec<IdentityRoleCounts> = counts
        .iter()
        .map(|(&identity, &(r, u, swap))| IdentityRoleCounts { identity, r, u, swap })
        .collect();
    let spread = |f: fn(&IdentityRoleCounts) -> usize| -> usize {
        let lo = per_identity.iter().map(f).min().unwrap();
        let hi = per_identity.iter().map(f).max().unwrap();
        hi - lo
    };
    let spread_r = spread(|c| c.r);
    let spread_u = spread(|c| c.u);
    let spread_swap = spread(|c| c.swap);
    let mut violations = Vec::new();
    for (name, s) in [("R", spread_r), ("U", spread_u), ("swap", spread_swap)] {
        if s > 1 {
            violations.push(format!("role {name} spread {s} exceeds 1"));
        }
    }
    BalanceReport {
        per_identity,
        spread_r,
        spread_u,
        spread_swap,
        r_position_a_fraction: a_count as f64 / pairs.len() as f64,
        violations,
    }
}

/// Kind of steering evaluation question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestionKind {
    Cultural,
    Neutral,
}

/// One generation-steering question. Cultural questions carry the related
/// identity and target its span; neutral questions have no related identity
/// and target both option-identity spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteeringQuestion {
    pub id: u32,
    pub kind: QuestionKind,
    pub item: u32,
    pub prompt: Vec<u32>,
    pub spans: SpanMap,
    pub r_position: Option<OptionSlot>,
    /// Identity spans whose identity->item edges the intervention targets.
    pub target_identity_spans: Vec<Span>,
}

/// Build the steering eval set: one cultural question per linked item in
/// match layout and one neutral question per neutral item. Foils avoid the
/// U identities the factorial pairs already used for that item, so the set
/// stays disjoint from discovery data.
pub fn make_steering_eval(
    catalog: &Catalog,
    pairs: &[FactorialPair],
    seed: u64,
) -> Result<Vec<SteeringQuestion>> {
    catalog.validate()?;
    let mut rng = rng_for(seed, "steering-eval");
    let mut used_u: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for p in pairs {
        used_u.entry(p.item).or_default().insert(p.u_identity);
    }
    let mut questions = Vec::new();
    let mut qid = 0u32;

    for item in catalog.linked_items() {
        let r = catalog.identity(item.associated.unwrap());
        let foreign: Vec<u32> = catalog.foreign_identities(&r.group).map(|i| i.id).collect();
        let unused: Vec<u32> = foreign
            .iter()
            .copied()
            .filter(|id| !used_u.get(&item.id).is_some_and(|s| s.contains(id)))
            .collect();
        let pool = if unused.is_empty() { &foreign } else { &unused };
        let foil = catalog.identity(pool[rng.gen_range(0..pool.len())]);
        let r_position = if rng.gen_bool(0.5) { OptionSlot::A } else { OptionSlot::B };
        let (a, b) = match r_position {
            OptionSlot::A => (&r.surface, &foil.surface),
            OptionSlot::B => (&foil.surface, &r.surface),
        };
        let built = scenario_prompt(qid as usize % N_SCENARIO_TEMPLATES, &item.surface, a, b);
        let target = built.spans.identity_at(r_position);
        questions.push(SteeringQuestion {
            id: qid,
            kind: QuestionKind::Cultural,
            item: item.id,
            prompt: built.tokens,
            spans: built.spans,
            r_position: Some(r_position),
            target_identity_spans: vec![target],
        });
        qid += 1;
    }

    let groups: Vec<String> = {
        let mut g: Vec<String> = catalog.identities.iter().map(|i| i.group.clone()).collect();
        g.sort();
        g.dedup();
        g
    };
    for item in catalog.neutral_items() {
        // two identities from distinct groups, rotated per question
        let g1 = &groups[qid as usize % groups.len()];
        let g2 = &groups[(qid as usize + 1) % groups.len()];
        let pick = |group: &str, rng: &mut rand_chacha::ChaCha8Rng| -> u32 {
            let members: Vec<u32> = catalog
                .identities
                .iter()
                .filter(|i| i.group == group)
                .map(|i| i.id)
                .collect();
            members[rng.gen_range(0..members.len())]
        };
        let ida = catalog.identity(pick(g1, &mut rng)).clone();
        let idb = catalog.identity(pick(g2, &mut rng)).clone();
        let built = scenario_prompt(qid as usize % N_SCENARIO_TEMPLATES, &item.surface, &ida.surface, &idb.surface);
        let targets = vec![built.spans.identity_a, built.spans.identity_b];
        questions.push(SteeringQuestion {
            id: qid,
            kind: QuestionKind::Neutral,
            item: item.id,
            prompt: built.tokens,
            spans: built.spans,
            r_position: None,
            target_identity_spans: targets,
        });
        qid += 1;
    }
    Ok(questions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::catalog::build_catalog;

    fn reference() -> Catalog {
        build_catalog(7, 16, 16, 8, 4).unwrap()
    }

    #[test]
    fn pair_counts_and_coverage() {
        let cat = reference();
        let pairs = make_factorial_pairs(&cat, 5, 11).unwrap();
        assert_eq!(pairs.len(), 80);
        let mut per_item: BTreeMap<u32, usize> = BTreeMap::new();
        for p in &pairs {
            *per_item.entry(p.item).or_default() += 1;
        }
        assert_eq!(per_item.len(), 16);
        assert!(per_item.values().all(|&c| c == 5));
    }

    #[test]
    fn prompts_differ_only_at_r_slot() {
        let cat = reference();
        let pairs = make_factorial_pairs(&cat, 5, 11).unwrap();
        validate_pairs(&cat, &pairs).unwrap();
        for p in &pairs {
            let r_span = p.match_spans.identity_at(p.r_position);
            let diffs: Vec<usize> = p
                .match_prompt
                .iter()
                .zip(&p.mismatch_prompt)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(i, _)| i)
                .collect();
            assert!(!diffs.is_empty());
            for d in diffs {
                assert!(d >= r_span.start && d < r_span.end);
            }
        }
    }

    #[test]
    fn determinism_across_calls() {
        let cat = reference();
        let a = make_factorial_pairs(&cat, 5, 11).unwrap();
        let b = make_factorial_pairs(&cat, 5, 11).unwrap();
        assert_eq!(a, b);
        let c = make_factorial_pairs(&cat, 5, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn knowledge_pairs_preserve_layout() {
        let cat = reference();
        let pairs = make_factorial_pairs(&cat, 5, 11).unwrap();
        let kpairs = make_knowledge_pairs(&pairs);
        assert_eq!(kpairs.len(), pairs.len());
        for (p, k) in pairs.iter().zip(&kpairs) {
            assert_eq!(
                (p.r_identity, p.u_identity, p.r_position),
                (k.r_identity, k.u_identity, k.r_position)
            );
            validate_pair_structure(&k.view()).unwrap();
            // (c) option span identical across the pair
            assert_eq!(k.match_spans.option_c, k.mismatch_spans.option_c);
            assert!(k.match_prompt.len() < p.match_prompt.len());
        }
    }

    #[test]
    fn balance_on_reference_corpus() {
        let cat = reference();
        let pairs = make_factorial_pairs(&cat, 5, 11).unwrap();
        let report = check_balance(&pairs);
        assert_eq!(report.spread_r, 0, "bijective catalog gives exact R balance");
        assert!(report.spread_u <= 1, "U spread {}", report.spread_u);
        assert!(report.spread_swap <= 1, "swap spread {}", report.spread_swap);
        assert!(report.is_balanced(), "{:?}", report.violations);
        assert_eq!(report.r_position_display().len(), 5);
    }

    #[test]
    fn unbalanced_corpus_is_flagged() {
        let cat = reference();
        let mut pairs = make_factorial_pairs(&cat, 5, 11).unwrap();
        // funnel every U into one identity: spread explodes
        let forced_u = pairs[0].u_identity;
        for p in &mut pairs {
            if catalog_group(&cat, p.r_identity) != catalog_group(&cat, forced_u) {
                p.u_identity = forced_u;
            }
        }
        let report = check_balance(&pairs);
        assert!(!report.is_balanced());
    }

    fn catalog_group(cat: &Catalog, id: u32) -> String {
        cat.identity(id).group.clone()
    }

    #[test]
    fn r_position_frequency_near_half_on_large_corpus() {
        let cat = build_catalog(7, 20, 20, 8, 4).unwrap();
        let pairs = make_factorial_pairs(&cat, 25, 13).unwrap();
        assert_eq!(pairs.len(), 500);
        let report = check_balance(&pairs);
        assert!(
            (0.45..=0.55).contains(&report.r_position_a_fraction),
            "fraction {}",
            report.r_position_a_fraction
        );
        assert!(report.spread_r <= 1 && report.spread_u <= 1 && report.spread_swap <= 1,
            "spreads: {} {} {}", report.spread_r, report.spread_u, report.spread_swap);
    }

    #[test]
    fn steering_eval_targets_and_kinds() {
        let cat = reference();
        let pairs = make_factorial_pairs(&cat, 5, 11).unwrap();
        let eval = make_steering_eval(&cat, &pairs, 17).unwrap();
        assert_eq!(eval.len(), 24);
        let cultural: Vec<_> = eval.iter().filter(|q| q.kind == QuestionKind::Cultural).collect();
        let neutral: Vec<_> = eval.iter().filter(|q| q.kind == QuestionKind::Neutral).collect();
        assert_eq!((cultural.len(), neutral.len()), (16, 8));
        for q in &cultural {
            assert_eq!(q.target_identity_spans.len(), 1);
            assert!(q.r_position.is_some());
            assert_eq!(q.target_identity_spans[0], q.spans.identity_at(q.r_position.unwrap()));
        }
        for q in &neutral {
            assert_eq!(q.target_identity_spans.len(), 2);
            assert!(q.r_position.is_none());
        }
    }
}
