//! Table construction for the `report` subcommand and the per-command CSVs.
//! Layouts mirror the analysis tables: binding strength, knockout effects,
//! random-head null, dose-response, steering deltas, and the S/K
//! dissociation, plus plot-ready series for the dose curve and the gap bars.

use std::path::{Path, PathBuf};

use crate::cli::artifacts::{
    load_json, DoseArtifact, KnockoutArtifact, NullArtifact, ProbeArtifact, SteerArtifact,
};
use crate::error::Result;
use crate::experiments::{DoseCurve, KnockoutReport, NullDistribution, SteeringReport};
use crate::metrics::PairScores;
use crate::report::{Cell, Table};
use crate::stats::mean;

/// Artifacts found in a results directory.
#[derive(Default)]
pub struct FoundArtifacts {
    pub knockout: Option<KnockoutArtifact>,
    pub dose: Option<DoseArtifact>,
    pub steering: Option<SteerArtifact>,
    pub probe: Option<ProbeArtifact>,
    pub random_baseline: Option<NullArtifact>,
    pub paths: Vec<PathBuf>,
}

pub fn collect_artifacts(dir: &Path) -> Result<FoundArtifacts> {
    let mut found = FoundArtifacts::default();
    let try_load = |name: &str| -> Option<PathBuf> {
        let path = dir.join(name);
        path.exists().then_some(path)
    };
    if let Some(p) = try_load("knockout.json") {
        found.knockout = Some(load_json(&p)?);
        found.paths.push(p);
    }
    if let Some(p) = try_load("dose.json") {
        found.dose = Some(load_json(&p)?);
        found.paths.push(p);
    }
    if let Some(p) = try_load("steering.json") {
        found.steering = Some(load_json(&p)?);
        found.paths.push(p);
    }
    if let Some(p) = try_load("probe.json") {
        found.probe = Some(load_json(&p)?);
        found.paths.push(p);
    }
    if let Some(p) = try_load("random_baseline.json") {
        found.random_baseline = Some(load_json(&p)?);
        found.paths.push(p);
    }
    Ok(found)
}

pub fn build_all_tables(found: &FoundArtifacts) -> Result<Vec<Table>> {
    let mut tables = Vec::new();
    if let Some(k) = &found.knockout {
        tables.push(binding_strength_table(k));
        tables.push(knockout_table(k));
    }
    if let Some(n) = &found.random_baseline {
        tables.push(random_baseline_table(&n.null));
    }
    if let Some(d) = &found.dose {
        tables.push(dose_table(&d.curve));
    }
    if let Some(s) = &found.steering {
        tables.push(steering_table(&s.report));
    }
    if let Some(p) = &found.probe {
        tables.push(dissociation_table(p));
    }
    Ok(tables)
}

fn heads_label(heads: &[crate::model::config::HeadId]) -> String {
    heads
        .iter()
        .map(|h| h.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

/// Binding strength at baseline with significance and directional
/// preference.
pub fn binding_strength_table(artifact: &KnockoutArtifact) -> Table {
    let b = &artifact.baseline;
    let mut t = Table::new(
        "binding_strength",
        &[
            "model", "strength_abs_delta_s", "mean_s_match", "mean_s_mismatch", "t", "p_two_sided",
            "dir_pref_match", "dir_pref_mismatch",
        ],
    );
    let mean_match = mean(&b.scores.iter().map(|s| s.s_match).collect::<Vec<_>>());
    let mean_mismatch = mean(&b.scores.iter().map(|s| s.s_mismatch).collect::<Vec<_>>());
    t.push_row(vec![
        Cell::Text("toy".into()),
        Cell::Num(b.strength),
        Cell::Num(mean_match),
        Cell::Num(mean_mismatch),
        Cell::Num(b.t_vs_zero.statistic),
        Cell::Num(b.t_vs_zero.p_two_sided),
        Cell::Num(b.dir_pref_match),
        Cell::Num(b.dir_pref_mismatch),
    ]);
    t
}

fn knockout_row(label: &str, r: &KnockoutReport) -> Vec<Cell> {
    vec![
        Cell::Text(label.to_string()),
        Cell::Text(r.condition.to_string()),
        Cell::Num(r.baseline_strength),
        Cell::Num(r.intervened_strength),
        Cell::Num(r.percent_change),
        r.t_paired.map_or(Cell::Text("n/a".into()), |t| Cell::Num(t.statistic)),
        r.t_paired.map_or(Cell::Text("n/a".into()), |t| Cell::Num(t.p_two_sided)),
    ]
}

/// Joint and per-head knockout changes for both conditions.
pub fn knockout_table(artifact: &KnockoutArtifact) -> Table {
    let mut t = Table::new(
        "knockout",
        &["heads", "condition", "baseline", "intervened", "pct_change", "t", "p_two_sided"],
    );
    t.push_row(knockout_row(&heads_label(&artifact.heads), &artifact.r_to_item));
    t.push_row(knockout_row(&heads_label(&artifact.heads), &artifact.u_to_item));
    for (head, report) in &artifact.per_head_r {
        t.push_row(knockout_row(&head.to_string(), report));
    }
    t
}

/// Identified change against the random layer-matched null.
pub fn random_baseline_table(null: &NullDistribution) -> Table {
    let mut t = Table::new(
        "random_baseline",
        &[
            "identified", "observed_pct", "null_mean_pct", "null_sd_pct", "null_p5_pct",
            "empirical_p",
        ],
    );
    t.push_row(vec![
        Cell::Text(heads_label(&null.identified)),
        Cell::Num(null.observed),
        Cell::Num(null.null_mean),
        Cell::Num(null.null_sd),
        Cell::Num(null.null_p5),
        Cell::Text(null.empirical_p.to_string()),
    ]);
    t
}

/// Per-trial null changes (audit view).
pub fn null_trials_table(null: &NullDistribution) -> Table {
    let mut t = Table::new("random_baseline_trials", &["trial", "pct_change"]);
    for (i, c) in null.changes.iter().enumerate() {
        t.push_row(vec![Cell::Int(i as i64), Cell::Num(*c)]);
    }
    t
}

/// Strength and relative change per alpha.
pub fn dose_table(curve: &DoseCurve) -> Table {
    let mut t = Table::new("dose_response", &["alpha", "strength", "pct_change_vs_alpha1"]);
    for p in &curve.points {
        t.push_row(vec![Cell::Num(p.alpha), Cell::Num(p.strength), Cell::Num(p.percent_change)]);
    }
    t
}

/// Plot series (x, y) for the dose curve.
pub fn dose_series(curve: &DoseCurve) -> Table {
    let mut t = Table::new("dose_curve", &["alpha", "pct_change"]);
    for p in &curve.points {
        t.push_row(vec![Cell::Num(p.alpha), Cell::Num(p.percent_change)]);
    }
    t
}

/// Steering accuracies and percentage-point deltas per alpha.
pub fn steering_table(report: &SteeringReport) -> Table {
    let mut t = Table::new(
        "steering",
        &["alpha", "neq_acc", "eq_acc", "delta_neq_pp", "delta_eq_pp"],
    );
    for p in &report.points {
        t.push_row(vec![
            Cell::Num(p.alpha),
            Cell::Num(p.accuracies.neq_acc),
            Cell::Num(p.accuracies.eq_acc),
            Cell::Num(p.delta_neq_pp),
            Cell::Num(p.delta_eq_pp),
        ]);
    }
    t
}

/// S versus K changes under the same knockout plus the gap and K/S ratios.
pub fn dissociation_table(artifact: &ProbeArtifact) -> Table {
    let mut t = Table::new(
        "dissociation",
        &[
            "condition", "s_baseline", "k_baseline", "gap_ratio", "s_pct_change", "k_pct_change",
            "ks_ratio",
        ],
    );
    for report in [&artifact.r_to_item, &artifact.u_to_item] {
        t.push_row(vec![
            Cell::Text(report.condition.to_string()),
            Cell::Num(report.s.baseline_strength),
            Cell::Num(report.k.baseline_strength),
            Cell::Num(report.gap_ratio_baseline),
            Cell::Num(report.s.percent_change),
            Cell::Num(report.k.percent_change),
            report
                .knockout_ratio
                .map_or(Cell::Text("n/a".into()), Cell::Num),
        ]);
    }
    t
}

/// Bar-plot series for the association-differentiation gap.
pub fn gap_bars(artifact: &ProbeArtifact) -> Table {
    let mut t = Table::new("gap_bars", &["model", "abs_delta_s", "abs_delta_k"]);
    t.push_row(vec![
        Cell::Text("toy".into()),
        Cell::Num(artifact.r_to_item.s.baseline_strength),
        Cell::Num(artifact.r_to_item.k.baseline_strength),
    ]);
    t
}

/// Canonical per-pair score export.
pub fn scores_table(scores: &[PairScores]) -> Table {
    let mut t = Table::new("scores", &["pair_id", "item", "s_match", "s_mismatch", "delta"]);
    for s in scores {
        t.push_row(vec![
            Cell::Int(s.pair_id as i64),
            Cell::Int(s.item as i64),
            Cell::Num(s.s_match),
            Cell::Num(s.s_mismatch),
            Cell::Num(s.delta),
        ]);
    }
    t
}
