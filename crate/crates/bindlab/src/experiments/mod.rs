//! The experiment suite: baseline pairing effect, edge knockouts with the
//! random-head null, dose-response, generation steering, and the knowledge
//! probe with its dissociation ratios.
//!
//! Every report keeps its raw per-pair and per-item values, so each derived
//! number (percent change, delta, ratio) can be recomputed from the report
//! alone. In the mismatch prompt the R condition targets the identity
//! occupying R's slot (the swap identity): both prompts receive structurally
//! identical interventions and the factorial logic stays intact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    binding_strength, directional_preference, s_score, OptionLogits, OptionSlot, PairScores,
    ParsedAnswer, SteeringAccuracies,
};
use crate::model::checkpoint::Checkpoint;
use crate::model::config::{EdgeSet, HeadId, InterventionSpec};
use crate::model::generate::greedy_generate;
use crate::rng::rng_for_indexed;
use crate::stats::{item_level_means, mean, one_sample_t, paired_t, percent_change, sample_sd,
    EmpiricalP, ItemMeans, TestResult};
use crate::world::pairs::{FactorialPair, KnowledgePair, PairView, QuestionKind, SteeringQuestion};
use crate::world::templates::Span;
use crate::world::vocab::OPTION_IDS;

/// Which identity's edges a knockout targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    RToItem,
    UToItem,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Condition::RToItem => write!(f, "R->item"),
            Condition::UToItem => write!(f, "U->item"),
        }
    }
}

/// The identity span a condition targets in one prompt. The R condition
/// follows R's option slot (swap identity in the mismatch prompt); the U
/// condition follows the other slot.
pub fn condition_span(view: &PairView<'_>, condition: Condition, is_match: bool) -> Span {
    let spans = if is_match { view.match_spans } else { view.mismatch_spans };
    match condition {
        Condition::RToItem => spans.identity_at(view.r_position),
        Condition::UToItem => spans.identity_at(view.r_position.other()),
    }
}

/// Edge rectangles for a head set: (identity span -> item span) on each head.
pub fn edges_for(heads: &[HeadId], query_span: Span, key_span: Span) -> Vec<EdgeSet> {
    heads
        .iter()
        .map(|&head| EdgeSet { head, query_span, key_span })
        .collect()
}

/// Score both prompts of every pair; `spec_for(view, is_match)` supplies the
/// intervention per prompt (None for a clean forward).
fn score_pairs<F>(checkpoint: &Checkpoint, views: &[PairView<'_>], spec_for: F) -> Result<Vec<PairScores>>
where
    F: Fn(&PairView<'_>, bool) -> Option<InterventionSpec> + Sync,
{
    let vocab = checkpoint.config.vocab_size;
    views
        .par_iter()
        .map(|view| {
            let score_one = |tokens: &[u32], spec: Option<InterventionSpec>| -> Result<f64> {
                let fwd = checkpoint.forward(tokens, spec.as_ref())?;
                let logits = OptionLogits::from_logit_row(fwd.last_logits(vocab), OPTION_IDS)?;
                Ok(s_score(logits))
            };
            let s_match = score_one(view.match_prompt, spec_for(view, true))?;
            let s_mismatch = score_one(view.mismatch_prompt, spec_for(view, false))?;
            Ok(PairScores::new(view.pair_id, view.item, s_match, s_mismatch))
        })
        .collect()
}

fn knockout_spec_for(
    heads: &[HeadId],
    condition: Condition,
) -> impl Fn(&PairView<'_>, bool) -> Option<InterventionSpec> + Sync + '_ {
    move |view, is_match| {
        if heads.is_empty() {
            return None;
        }
        let spans = if is_match { view.match_spans } else { view.mismatch_spans };
        let q = condition_span(view, condition, is_match);
        Some(InterventionSpec::knockout(edges_for(heads, q, spans.item)))
    }
}

// ---------------------------------------------------------------------------
// Baseline
// ---------------------------------------------------------------------------

/// Baseline evaluation: per-pair scores, binding strength, the item-level
/// test against zero, and directional preference in both conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub scores: Vec<PairScores>,
    pub strength: f64,
    pub item_means: ItemMeans,
    pub t_vs_zero: TestResult,
    pub dir_pref_match: f64,
    pub dir_pref_mismatch: f64,
    /// Item-level test of the match-condition preference against 0.5.
    pub dir_pref_match_t_vs_half: Option<TestResult>,
}

pub fn run_baseline(checkpoint: &Checkpoint, pairs: &[FactorialPair]) -> Result<BaselineReport> {
    if pairs.is_empty() {
        return Err(Error::Input("no pairs to evaluate".into()));
    }
    let views: Vec<PairView<'_>> = pairs.iter().map(FactorialPair::view).collect();
    let scores = score_pairs(checkpoint, &views, |_, _| None)?;
    let (strength, item_means) = binding_strength(&scores);
    let deltas: Vec<f64> = scores.iter().map(|s| s.delta).collect();
    let _ = deltas;
    let t_vs_zero = one_sample_t(&item_means.means)?;

    // directional preference per condition
    let vocab = checkpoint.config.vocab_size;
    let prefs: Result<Vec<(f64, f64)>> = views
        .par_iter()
        .map(|view| {
            let pref = |tokens: &[u32]| -> Result<f64> {
                let fwd = checkpoint.forward(tokens, None)?;
                let l = OptionLogits::from_logit_row(fwd.last_logits(vocab), OPTION_IDS)?;
                let (p_a, p_b) = l.identity_probs();
                directional_preference(p_a, p_b, view.r_position)
            };
            Ok((pref(view.match_prompt)?, pref(view.mismatch_prompt)?))
        })
        .collect();
    let prefs = prefs?;
    let match_prefs: Vec<f64> = prefs.iter().map(|p| p.0).collect();
    let mismatch_prefs: Vec<f64> = prefs.iter().map(|p| p.1).collect();
    let items: Vec<u32> = views.iter().map(|v| v.item).collect();
    let match_pref_items = item_level_means(&match_prefs, &items);
    let centered: Vec<f64> = match_pref_items.means.iter().map(|m| m - 0.5).collect();
    let dir_pref_match_t_vs_half = one_sample_t(&centered).ok();

    Ok(BaselineReport {
        strength,
        item_means,
        t_vs_zero,
        dir_pref_match: mean(&match_prefs),
        dir_pref_mismatch: mean(&mismatch_prefs),
        dir_pref_match_t_vs_half,
        scores,
    })
}

// ---------------------------------------------------------------------------
// Knockout
// ---------------------------------------------------------------------------

/// Effect of one edge knockout on binding strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockoutReport {
    pub condition: Condition,
    pub heads: Vec<HeadId>,
    pub baseline_strength: f64,
    pub intervened_strength: f64,
    /// 100 * (intervened - baseline) / baseline
    pub percent_change: f64,
    pub item_ids: Vec<u32>,
    pub baseline_item_deltas: Vec<f64>,
    pub intervened_item_deltas: Vec<f64>,
    /// Paired item-level t-test on per-item binding strengths
    /// (|mean delta| per item, intervened vs baseline); absent when the
    /// differences are degenerate (e.g. an empty head set).
    pub t_paired: Option<TestResult>,
    pub baseline_scores: Vec<PairScores>,
    pub intervened_scores: Vec<PairScores>,
}

pub(crate) fn run_knockout_views(
    checkpoint: &Checkpoint,
    views: &[PairView<'_>],
    heads: &[HeadId],
    condition: Condition,
) -> Result<KnockoutReport> {
    if views.is_empty() {
        return Err(Error::Input("no pairs to evaluate".into()));
    }
    let baseline_scores = score_pairs(checkpoint, views, |_, _| None)?;
    let intervened_scores = score_pairs(checkpoint, views, knockout_spec_for(heads, condition))?;
    let (baseline_strength, base_items) = binding_strength(&baseline_scores);
    let (intervened_strength, int_items) = binding_strength(&intervened_scores);
    let percent_change = percent_change(baseline_strength, intervened_strength)?;
    let base_abs: Vec<f64> = base_items.means.iter().map(|d| d.abs()).collect();
    let int_abs: Vec<f64> = int_items.means.iter().map(|d| d.abs()).collect();
    let t_paired = paired_t(&int_abs, &base_abs).ok();
    Ok(KnockoutReport {
        condition,
        heads: heads.to_vec(),
        baseline_strength,
        intervened_strength,
        percent_change,
        item_ids: base_items.items.clone(),
        baseline_item_deltas: base_items.means,
        intervened_item_deltas: int_items.means,
        t_paired,
        baseline_scores,
        intervened_scores,
    })
}

/// Knock out (identity -> item) edges of the given heads in both prompts of
/// every pair and report the strength change.
pub fn run_knockout(
    checkpoint: &Checkpoint,
    pairs: &[FactorialPair],
    heads: &[HeadId],
    condition: Condition,
) -> Result<KnockoutReport> {
    for h in heads {
        if !h.in_bounds(&checkpoint.config) {
            return Err(Error::Intervention(format!(
                "head {h} outside model with {} layers x {} heads",
                checkpoint.config.n_layers, checkpoint.config.n_heads
            )));
        }
    }
    let views: Vec<PairView<'_>> = pairs.iter().map(FactorialPair::view).collect();
    run_knockout_views(checkpoint, &views, heads, condition)
}

/// One knockout report per head, for the per-head causal breakdown.
pub fn run_knockout_per_head(
    checkpoint: &Checkpoint,
    pairs: &[FactorialPair],
    heads: &[HeadId],
    condition: Condition,
) -> Result<Vec<(HeadId, KnockoutReport)>> {
    heads
        .iter()
        .map(|&h| Ok((h, run_knockout(checkpoint, pairs, &[h], condition)?)))
        .collect()
}

// ---------------------------------------------------------------------------
// Random-head null
// ---------------------------------------------------------------------------

/// Null distribution of strength changes under layer-matched random head
/// sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub trials: usize,
    pub changes: Vec<f64>,
    pub observed: f64,
    pub identified: Vec<HeadId>,
    pub empirical_p: EmpiricalP,
    pub null_mean: f64,
    pub null_sd: f64,
    pub null_p5: f64,
}

/// Sample a layer-matched head set: for each layer, as many heads as the
/// identified set has there, drawn without replacement from that layer's
/// other heads.
pub fn sample_layer_matched(
    config: &crate::model::config::ModelConfig,
    identified: &[HeadId],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<HeadId>> {
    use rand::seq::SliceRandom;
    let mut sampled = Vec::with_capacity(identified.len());
    for layer in 0..config.n_layers {
        let need = identified.iter().filter(|h| h.layer == layer).count();
        if need == 0 {
            continue;
        }
        let pool: Vec<HeadId> = (0..config.n_heads)
            .map(|h| HeadId::new(layer, h))
            .filter(|h| !identified.contains(h))
            .collect();
        if pool.len() < need {
            return Err(Error::Config(format!(
                "layer {layer} has only {} non-identified heads, need {need}",
                pool.len()
            )));
        }
        let mut pool = pool;
        pool.shuffle(rng);
        sampled.extend_from_slice(&pool[..need]);
    }
    sampled.sort();
    Ok(sampled)
}

/// Observed R-condition change of the identified heads against `trials`
/// layer-matched random head sets. The empirical p is the fraction of trials
/// with a change at least as negative, floored at 1/trials.
pub fn run_random_baseline(
    checkpoint: &Checkpoint,
    pairs: &[FactorialPair],
    identified: &[HeadId],
    trials: usize,
    seed: u64,
) -> Result<NullDistribution> {
    if identified.is_empty() {
        return Err(Error::Input("identified head set is empty".into()));
    }
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let observed_report = run_knockout(checkpoint, pairs, identified, Condition::RToItem)?;
    let observed = observed_report.percent_change;

    let views: Vec<PairView<'_>> = pairs.iter().map(FactorialPair::view).collect();
    let baseline = observed_report.baseline_strength;

    let changes: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for_indexed(seed, "random-baseline", t as u64);
            let heads = sample_layer_matched(&checkpoint.config, identified, &mut rng)?;
            let scores =
                score_pairs(checkpoint, &views, knockout_spec_for(&heads, Condition::RToItem))?;
            let (strength, _) = binding_strength(&scores);
            percent_change(baseline, strength)
        })
        .collect();
    let changes = changes?;
    let empirical_p = EmpiricalP::from_null(observed, &changes);
    let mut sorted = changes.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p5_idx = ((0.05 * trials as f64).ceil() as usize).max(1) - 1;
    Ok(NullDistribution {
        trials,
        observed,
        identified: identified.to_vec(),
        empirical_p,
        null_mean: mean(&changes),
        null_sd: if trials > 1 { sample_sd(&changes) } else { 0.0 },
        null_p5: sorted[p5_idx],
        changes,
    })
}

// ---------------------------------------------------------------------------
// Dose-response
// ---------------------------------------------------------------------------

/// Binding strength under one blend factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosePoint {
    pub alpha: f64,
    pub strength: f64,
    /// Relative change versus the alpha=1 entry.
    pub percent_change: f64,
    pub pair_deltas: Vec<f64>,
}

/// Strength as a function of the blend factor alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseCurve {
    pub heads: Vec<HeadId>,
    pub points: Vec<DosePoint>,
}

impl DoseCurve {
    pub fn point_at(&self, alpha: f64) -> Option<&DosePoint> {
        self.points.iter().find(|p| p.alpha == alpha)
    }
}

/// Evaluate the R-condition blend across an alpha grid (must include 1).
pub fn run_dose_response(
    checkpoint: &Checkpoint,
    pairs: &[FactorialPair],
    heads: &[HeadId],
    alphas: &[f64],
) -> Result<DoseCurve> {
    if !alphas.contains(&1.0) {
        return Err(Error::Config("alpha grid must include 1.0".into()));
    }
    if heads.is_empty() {
        return Err(Error::Input("head set is empty".into()));
    }
    let views: Vec<PairView<'_>> = pairs.iter().map(FactorialPair::view).collect();
    let eval_at = |alpha: f64| -> Result<(f64, Vec<f64>)> {
        let scores = score_pairs(checkpoint, &views, |view, is_match| {
            let spans = if is_match { view.match_spans } else { view.mismatch_spans };
            let q = condition_span(view, Condition::RToItem, is_match);
            Some(
                InterventionSpec::blend(edges_for(heads, q, spans.item), alpha)
                    .expect("alpha is finite"),
            )
        })?;
        let (strength, _) = binding_strength(&scores);
        Ok((strength, scores.iter().map(|s| s.delta).collect()))
    };
    let (ref_strength, _) = eval_at(1.0)?;
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let (strength, pair_deltas) = eval_at(alpha)?;
        points.push(DosePoint {
            alpha,
            strength,
            percent_change: percent_change(ref_strength, strength)?,
            pair_deltas,
        });
    }
    Ok(DoseCurve { heads: heads.to_vec(), points })
}

// ---------------------------------------------------------------------------
// Generation steering
// ---------------------------------------------------------------------------

/// Accuracies under one steering factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteerPoint {
    pub alpha: f64,
    pub accuracies: SteeringAccuracies,
    pub delta_neq_pp: f64,
    pub delta_eq_pp: f64,
}

/// Generation-time steering results across an alpha grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringReport {
    pub heads: Vec<HeadId>,
    pub max_steps: usize,
    pub points: Vec<SteerPoint>,
}

/// Greedy generation under the blend intervention on each question's target
/// identity spans; answers are the first emitted option letter.
pub fn run_steering(
    checkpoint: &Checkpoint,
    eval_set: &[SteeringQuestion],
    heads: &[HeadId],
    alphas: &[f64],
    max_steps: usize,
) -> Result<SteeringReport> {
    if !alphas.contains(&1.0) {
        return Err(Error::Config("alpha grid must include 1.0".into()));
    }
    let cultural: Vec<&SteeringQuestion> =
        eval_set.iter().filter(|q| q.kind == QuestionKind::Cultural).collect();
    let neutral: Vec<&SteeringQuestion> =
        eval_set.iter().filter(|q| q.kind == QuestionKind::Neutral).collect();
    if cultural.is_empty() || neutral.is_empty() {
        return Err(Error::Input(
            "steering eval set needs both cultural and neutral questions".into(),
        ));
    }

    let answer_under = |q: &SteeringQuestion, alpha: f64| -> Result<ParsedAnswer> {
        let mut edges = Vec::new();
        for &span in &q.target_identity_spans {
            edges.extend(edges_for(heads, span, q.spans.item));
        }
        let spec = InterventionSpec::blend(edges, alpha).expect("alpha is finite");
        let continuation = greedy_generate(checkpoint, &q.prompt, Some(&spec), max_steps)?;
        Ok(crate::metrics::parse_answer(&continuation, OPTION_IDS))
    };

    let acc_at = |alpha: f64| -> Result<SteeringAccuracies> {
        let cultural_outcomes: Result<Vec<(OptionSlot, ParsedAnswer)>> = cultural
            .par_iter()
            .map(|q| {
                let slot = q.r_position.ok_or_else(|| {
                    Error::Input(format!("cultural question {} lacks an R slot", q.id))
                })?;
                Ok((slot, answer_under(q, alpha)?))
            })
            .collect();
        let neutral_outcomes: Result<Vec<ParsedAnswer>> =
            neutral.par_iter().map(|q| answer_under(q, alpha)).collect();
        crate::metrics::steering_accuracies(&cultural_outcomes?, &neutral_outcomes?)
    };

    let baseline = acc_at(1.0)?;
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let accuracies = if alpha == 1.0 { baseline } else { acc_at(alpha)? };
        let (delta_neq_pp, delta_eq_pp) = accuracies.delta_pp(&baseline);
        points.push(SteerPoint { alpha, accuracies, delta_neq_pp, delta_eq_pp });
    }
    Ok(SteeringReport { heads: heads.to_vec(), max_steps, points })
}

// ---------------------------------------------------------------------------
// Knowledge probe
// ---------------------------------------------------------------------------

/// Binding (S) versus knowledge (K) under the identical knockout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissociationReport {
    pub condition: Condition,
    pub s: KnockoutReport,
    pub k: KnockoutReport,
    /// |delta K| / |delta S| at baseline (association-differentiation gap).
    pub gap_ratio_baseline: f64,
    /// K% / S% under knockout; absent when the S change is zero.
    pub knockout_ratio: Option<f64>,
}

/// Apply the same knockout to the scenario pairs and their derived knowledge
/// pairs and report both strength changes plus the K/S ratios.
pub fn run_knowledge_probe(
    checkpoint: &Checkpoint,
    pairs: &[FactorialPair],
    kpairs: &[KnowledgePair],
    heads: &[HeadId],
    condition: Condition,
) -> Result<DissociationReport> {
    if pairs.len() != kpairs.len()
        || pairs
            .iter()
            .zip(kpairs)
            .any(|(p, k)| p.pair_id != k.pair_id || p.item != k.item || p.r_position != k.r_position)
    {
        return Err(Error::Input(
            "knowledge pairs must be derived from the same factorial pairs".into(),
        ));
    }
    let s = run_knockout(checkpoint, pairs, heads, condition)?;
    let kviews: Vec<PairView<'_>> = kpairs.iter().map(KnowledgePair::view).collect();
    let k = run_knockout_views(checkpoint, &kviews, heads, condition)?;
    let gap_ratio_baseline = k.baseline_strength / s.baseline_strength;
    let knockout_ratio = if s.percent_change != 0.0 {
        Some(k.percent_change / s.percent_change)
    } else {
        None
    };
    Ok(DissociationReport { condition, s, k, gap_ratio_baseline, knockout_ratio })
}
