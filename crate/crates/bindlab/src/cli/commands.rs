//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cli::artifacts::{
    save_json, CandidateArtifact, DoseArtifact, KnockoutArtifact, NullArtifact, ProbeArtifact,
    SteerArtifact,
};
use crate::cli::{
    build_manifest, heads, tables, DiscoverArgs, DoseArgs, GenBenchArgs, KnockoutArgs, ProbeArgs,
    RandomBaselineArgs, ReportArgs, SteerArgs, TrainToyArgs,
};
use crate::error::{Error, Result};
use crate::experiments::{
    run_baseline, run_dose_response, run_knockout, run_knockout_per_head, run_knowledge_probe,
    run_random_baseline, run_steering, Condition,
};
use crate::model::checkpoint::Checkpoint;
use crate::model::config::ModelConfig;
use crate::report::{write_atomic, Cell, ReportFormat, Table};
use crate::train::{train_toy, LrSchedule, TrainConfig};
use crate::world::jsonl::{
    generate_benchmark, read_benchmark, read_corpus, write_benchmark, write_corpus, BenchParams,
    Benchmark,
};
use crate::world::pairs::{check_balance, make_knowledge_pairs};
use crate::world::vocab::Vocab;

fn parse_alphas(spec: &str) -> Result<Vec<f64>> {
    let alphas: std::result::Result<Vec<f64>, _> =
        spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let alphas = alphas.map_err(|e| Error::Config(format!("bad alpha grid {spec:?}: {e}")))?;
    if alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config("alpha grid entries must be finite".into()));
    }
    Ok(alphas)
}

fn load_bench(path: &Path) -> Result<Benchmark> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    read_benchmark(std::io::BufReader::new(file))
}

fn manifest_sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

pub fn gen_bench(args: GenBenchArgs, argv: Vec<String>) -> Result<()> {
    let params = BenchParams {
        seed: args.seed,
        n_identities: args.identities,
        n_linked_items: args.linked_items,
        n_neutral_items: args.neutral_items,
        n_groups: args.groups,
        pairs_per_item: args.pairs_per_item,
    };
    let config = serde_json::json!({
        "params": params,
        "repeats": args.repeats,
        "out": args.out.to_string_lossy(),
        "corpus_out": args.corpus_out.as_ref().map(|p| p.to_string_lossy().into_owned()),
    });
    let manifest = build_manifest(
        "gen-bench",
        argv,
        config,
        BTreeMap::from([("root".to_string(), args.seed)]),
        &[],
    )?;

    let mut bench = generate_benchmark(params)?;
    bench.header.manifest_id = manifest.manifest_id.clone();
    let mut buf = Vec::new();
    write_benchmark(&bench, &mut buf)?;
    write_atomic(&args.out, &buf)?;

    if let Some(corpus_out) = &args.corpus_out {
        let corpus =
            crate::world::corpus::generate_training_corpus(&bench.catalog, args.repeats, args.seed)?;
        let mut buf = Vec::new();
        write_corpus(&corpus, &manifest.manifest_id, &mut buf)?;
        write_atomic(corpus_out, &buf)?;
        println!(
            "corpus: {} sentences (longest {}) -> {}",
            corpus.sequences.len(),
            corpus.max_len(),
            corpus_out.display()
        );
    }
    manifest.save(&manifest_sidecar(&args.out))?;

    let balance = check_balance(&bench.pairs);
    println!(
        "benchmark: {} pairs over {} items, {} steering questions -> {}",
        bench.pairs.len(),
        bench.catalog.linked_items().count(),
        bench.steering.len(),
        args.out.display()
    );
    println!(
        "balance: role spreads R={} U={} swap={}, P(R at a)={}{}",
        balance.spread_r,
        balance.spread_u,
        balance.spread_swap,
        balance.r_position_display(),
        if balance.is_balanced() { "" } else { " [VIOLATIONS]" },
    );
    for v in &balance.violations {
        println!("  violation: {v}");
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    model: Option<ModelSection>,
    train: Option<TrainSection>,
}

#[derive(Debug, Default, Deserialize)]
struct ModelSection {
    layers: Option<usize>,
    heads: Option<usize>,
    d_model: Option<usize>,
    d_head: Option<usize>,
    max_seq: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
struct TrainSection {
    steps: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    lr_schedule: Option<String>,
    seed: Option<u64>,
    eval_every: Option<usize>,
}

fn parse_schedule(name: &str) -> Result<LrSchedule> {
    match name {
        "constant" => Ok(LrSchedule::Constant),
        "cosine" => Ok(LrSchedule::Cosine),
        other => Err(Error::Config(format!(
            "unknown lr schedule {other:?} (expected constant or cosine)"
        ))),
    }
}

/// Reference desk-scale model: 4 layers x 8 heads, d_model 128.
pub fn reference_model_config() -> ModelConfig {
    ModelConfig {
        n_layers: 4,
        n_heads: 8,
        d_model: 128,
        d_head: 16,
        vocab_size: Vocab::shared().len(),
        max_seq: 64,
        seed: 7,
    }
}

/// Reference training recipe for the desk-scale run.
pub fn reference_train_config() -> TrainConfig {
    TrainConfig {
        steps: 900,
        batch_size: 32,
        learning_rate: 1.5e-3,
        lr_schedule: LrSchedule::Cosine,
        seed: 7,
        eval_every: 50,
    }
}

pub fn train_toy_cmd(args: TrainToyArgs, argv: Vec<String>) -> Result<()> {
    let file_cfg: FileConfig = match &args.config {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        None => FileConfig::default(),
    };
    let fm = file_cfg.model.unwrap_or_default();
    let ft = file_cfg.train.unwrap_or_default();

    let defaults = reference_model_config();
    let model_config = ModelConfig {
        n_layers: args.layers.or(fm.layers).unwrap_or(defaults.n_layers),
        n_heads: args.heads.or(fm.heads).unwrap_or(defaults.n_heads),
        d_model: args.d_model.or(fm.d_model).unwrap_or(defaults.d_model),
        d_head: args.d_head.or(fm.d_head).unwrap_or(defaults.d_head),
        vocab_size: Vocab::shared().len(),
        max_seq: args.max_seq.or(fm.max_seq).unwrap_or(defaults.max_seq),
        seed: args.model_seed.or(fm.seed).unwrap_or(defaults.seed),
    };
    let train_defaults = reference_train_config();
    let schedule = match (&args.lr_schedule, &ft.lr_schedule) {
        (Some(s), _) => parse_schedule(s)?,
        (None, Some(s)) => parse_schedule(s)?,
        _ => train_defaults.lr_schedule,
    };
    let train_config = TrainConfig {
        steps: args.steps.or(ft.steps).unwrap_or(train_defaults.steps),
        batch_size: args.batch_size.or(ft.batch_size).unwrap_or(train_defaults.batch_size),
        learning_rate: args
            .learning_rate
            .or(ft.learning_rate)
            .unwrap_or(train_defaults.learning_rate),
        lr_schedule: schedule,
        seed: args.seed.or(ft.seed).unwrap_or(train_defaults.seed),
        eval_every: args.eval_every.or(ft.eval_every).unwrap_or(train_defaults.eval_every),
    };

    let corpus = read_corpus(std::io::BufReader::new(std::fs::File::open(&args.corpus)?))?;
    let config_snapshot = serde_json::json!({
        "model": model_config,
        "train": train_config,
        "optimizer": crate::train::optimizer_descriptor(),
        "out": args.out.to_string_lossy(),
    });
    let manifest = build_manifest(
        "train-toy",
        argv,
        config_snapshot,
        BTreeMap::from([
            ("model".to_string(), model_config.seed),
            ("train".to_string(), train_config.seed),
        ]),
        &[&args.corpus],
    )?;

    let (mut ckpt, trace) = train_toy(&model_config, &corpus.sequences, &train_config)?;
    ckpt.meta.insert("manifest_id".into(), manifest.manifest_id.clone());
    ckpt.save_to_path(&args.out)?;

    let mut loss_table = Table::new("loss_trace", &["step", "loss"]);
    for (step, loss) in &trace.entries {
        loss_table.push_row(vec![Cell::Int(*step as i64), Cell::Num(*loss)]);
    }
    let trace_path = args
        .loss_trace
        .clone()
        .unwrap_or_else(|| args.out.with_extension("loss.csv"));
    write_atomic(&trace_path, loss_table.to_csv(&manifest.manifest_id)?.as_bytes())?;
    manifest.save(&manifest_sidecar(&args.out))?;

    let first = trace.entries.first().map(|e| e.1).unwrap_or(f64::NAN);
    let last = trace.entries.last().map(|e| e.1).unwrap_or(f64::NAN);
    println!(
        "trained {} steps: eval loss {first:.4} -> {last:.4}; checkpoint -> {}",
        train_config.steps,
        args.out.display()
    );
    Ok(())
}

pub fn discover(args: DiscoverArgs, argv: Vec<String>) -> Result<()> {
    let bench = load_bench(&args.pairs)?;
    let ckpt = Checkpoint::load_from_path(&args.ckpt)?;
    let manifest = build_manifest(
        "discover",
        argv,
        serde_json::json!({ "seed": args.seed, "out": args.out.to_string_lossy() }),
        BTreeMap::from([("folds".to_string(), args.seed)]),
        &[&args.pairs, &args.ckpt],
    )?;
    let features = crate::discovery::build_feature_matrix(&ckpt, &bench.pairs)?;
    let candidates = crate::discovery::grouped_cv_select(
        &features,
        &crate::discovery::default_lambda_grid(),
        5,
        3,
        args.seed,
    )?;
    let artifact = CandidateArtifact {
        manifest_id: manifest.manifest_id.clone(),
        kind: "candidates".into(),
        model_config: ckpt.config,
        candidates,
    };
    save_json(&args.out, &artifact)?;
    manifest.save(&manifest_sidecar(&args.out))?;
    println!("candidate heads ({}):", artifact.candidates.len());
    for c in &artifact.candidates {
        println!(
            "  L{}H{}  folds {}/5  mean|coef| {:.4}",
            c.layer, c.head, c.folds_selected, c.mean_abs_coef
        );
    }
    Ok(())
}

pub fn knockout(args: KnockoutArgs, argv: Vec<String>) -> Result<()> {
    let bench = load_bench(&args.pairs)?;
    let ckpt = Checkpoint::load_from_path(&args.ckpt)?;
    let head_set = heads::resolve(&args.heads)?;
    let manifest = build_manifest(
        "knockout",
        argv,
        serde_json::json!({
            "heads": head_set.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            "out": args.out.to_string_lossy(),
        }),
        BTreeMap::new(),
        &[&args.pairs, &args.ckpt],
    )?;

    let baseline = run_baseline(&ckpt, &bench.pairs)?;
    let r = run_knockout(&ckpt, &bench.pairs, &head_set, Condition::RToItem)?;
    let u = run_knockout(&ckpt, &bench.pairs, &head_set, Condition::UToItem)?;
    let per_head_r = run_knockout_per_head(&ckpt, &bench.pairs, &head_set, Condition::RToItem)?;

    std::fs::create_dir_all(&args.out)?;
    let artifact = KnockoutArtifact {
        manifest_id: manifest.manifest_id.clone(),
        kind: "knockout".into(),
        heads: head_set.clone(),
        baseline,
        r_to_item: r,
        u_to_item: u,
        per_head_r,
    };
    save_json(&args.out.join("knockout.json"), &artifact)?;
    write_atomic(
        &args.out.join("knockout.csv"),
        tables::knockout_table(&artifact).to_csv(&manifest.manifest_id)?.as_bytes(),
    )?;
    write_atomic(
        &args.out.join("baseline_scores.csv"),
        tables::scores_table(&artifact.baseline.scores)
            .to_csv(&manifest.manifest_id)?
            .as_bytes(),
    )?;
    manifest.save(&args.out.join("knockout.manifest.json"))?;
    println!(
        "R->item: {:+.2}% (baseline {:.4} -> {:.4}); U->item control: {:+.2}%",
        artifact.r_to_item.percent_change,
        artifact.r_to_item.baseline_strength,
        artifact.r_to_item.intervened_strength,
        artifact.u_to_item.percent_change,
    );
    Ok(())
}

pub fn dose(args: DoseArgs, argv: Vec<String>) -> Result<()> {
    let bench = load_bench(&args.pairs)?;
    let ckpt = Checkpoint::load_from_path(&args.ckpt)?;
    let head_set = heads::resolve(&args.heads)?;
    let alphas = parse_alphas(&args.alphas)?;
    let manifest = build_manifest(
        "dose",
        argv,
        serde_json::json!({
            "heads": head_set.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            "alphas": alphas,
            "out": args.out.to_string_lossy(),
        }),
        BTreeMap::new(),
        &[&args.pairs, &args.ckpt],
    )?;
    let curve = run_dose_response(&ckpt, &bench.pairs, &head_set, &alphas)?;
    std::fs::create_dir_all(&args.out)?;
    let artifact = DoseArtifact {
        manifest_id: manifest.manifest_id.clone(),
        kind: "dose".into(),
        curve,
    };
    save_json(&args.out.join("dose.json"), &artifact)?;
    write_atomic(
        &args.out.join("dose.csv"),
        tables::dose_table(&artifact.curve).to_csv(&manifest.manifest_id)?.as_bytes(),
    )?;
    manifest.save(&args.out.join("dose.manifest.json"))?;
    for p in &artifact.curve.points {
        println!("alpha {:>5}: strength {:.4} ({:+.2}%)", p.alpha, p.strength, p.percent_change);
    }
    Ok(())
}

pub fn steer(args: SteerArgs, argv: Vec<String>) -> Result<()> {
    let bench = load_bench(&args.bench)?;
    let ckpt = Checkpoint::load_from_path(&args.ckpt)?;
    let head_set = heads::resolve(&args.heads)?;
    let alphas = parse_alphas(&args.alphas)?;
    let manifest = build_manifest(
        "steer",
        argv,
        serde_json::json!({
            "heads": head_set.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            "alphas": alphas,
            "max_steps": args.max_steps,
            "out": args.out.to_string_lossy(),
        }),
        BTreeMap::new(),
        &[&args.bench, &args.ckpt],
    )?;
    let report = run_steering(&ckpt, &bench.steering, &head_set, &alphas, args.max_steps)?;
    std::fs::create_dir_all(&args.out)?;
    let artifact = SteerArtifact {
        manifest_id: manifest.manifest_id.clone(),
        kind: "steering".into(),
        report,
    };
    save_json(&args.out.join("steering.json"), &artifact)?;
    write_atomic(
        &args.out.join("steering.csv"),
        tables::steering_table(&artifact.report)
            .to_csv(&manifest.manifest_id)?
            .as_bytes(),
    )?;
    manifest.save(&args.out.join("steering.manifest.json"))?;
    for p in &artifact.report.points {
        println!(
            "alpha {:>5}: neq_acc {:.3} ({:+.1} pp), eq_acc {:.3} ({:+.1} pp)",
            p.alpha, p.accuracies.neq_acc, p.delta_neq_pp, p.accuracies.eq_acc, p.delta_eq_pp
        );
    }
    Ok(())
}

pub fn probe(args: ProbeArgs, argv: Vec<String>) -> Result<()> {
    let bench = load_bench(&args.pairs)?;
    let ckpt = Checkpoint::load_from_path(&args.ckpt)?;
    let head_set = heads::resolve(&args.heads)?;
    let manifest = build_manifest(
        "probe",
        argv,
        serde_json::json!({
            "heads": head_set.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            "out": args.out.to_string_lossy(),
        }),
        BTreeMap::new(),
        &[&args.pairs, &args.ckpt],
    )?;
    let kpairs = make_knowledge_pairs(&bench.pairs);
    let r = run_knowledge_probe(&ckpt, &bench.pairs, &kpairs, &head_set, Condition::RToItem)?;
    let u = run_knowledge_probe(&ckpt, &bench.pairs, &kpairs, &head_set, Condition::UToItem)?;
    std::fs::create_dir_all(&args.out)?;
    let artifact = ProbeArtifact {
        manifest_id: manifest.manifest_id.clone(),
        kind: "probe".into(),
        r_to_item: r,
        u_to_item: u,
    };
    save_json(&args.out.join("probe.json"), &artifact)?;
    write_atomic(
        &args.out.join("probe.csv"),
        tables::dissociation_table(&artifact).to_csv(&manifest.manifest_id)?.as_bytes(),
    )?;
    manifest.save(&args.out.join("probe.manifest.json"))?;
    println!(
        "baseline gap |dK|/|dS| = {:.3}; R->item knockout: S {:+.2}%, K {:+.2}%, K/S {}",
        artifact.r_to_item.gap_ratio_baseline,
        artifact.r_to_item.s.percent_change,
        artifact.r_to_item.k.percent_change,
        artifact
            .r_to_item
            .knockout_ratio
            .map(|r| format!("{r:.3}"))
            .unwrap_or_else(|| "n/a".into()),
    );
    Ok(())
}

pub fn random_baseline(args: RandomBaselineArgs, argv: Vec<String>) -> Result<()> {
    let bench = load_bench(&args.pairs)?;
    let ckpt = Checkpoint::load_from_path(&args.ckpt)?;
    let head_set = heads::resolve(&args.heads)?;
    let manifest = build_manifest(
        "random-baseline",
        argv,
        serde_json::json!({
            "heads": head_set.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            "trials": args.trials,
            "seed": args.seed,
            "out": args.out.to_string_lossy(),
        }),
        BTreeMap::from([("trials".to_string(), args.seed)]),
        &[&args.pairs, &args.ckpt],
    )?;
    let null = run_random_baseline(&ckpt, &bench.pairs, &head_set, args.trials, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let artifact = NullArtifact {
        manifest_id: manifest.manifest_id.clone(),
        kind: "random_baseline".into(),
        null,
    };
    save_json(&args.out.join("random_baseline.json"), &artifact)?;
    write_atomic(
        &args.out.join("random_baseline.csv"),
        tables::null_trials_table(&artifact.null)
            .to_csv(&manifest.manifest_id)?
            .as_bytes(),
    )?;
    manifest.save(&args.out.join("random_baseline.manifest.json"))?;
    println!(
        "observed {:+.2}% vs null mean {:+.2}% (sd {:.2}, 5th pctl {:+.2}%): {}",
        artifact.null.observed,
        artifact.null.null_mean,
        artifact.null.null_sd,
        artifact.null.null_p5,
        artifact.null.empirical_p,
    );
    Ok(())
}

pub fn report(args: ReportArgs, argv: Vec<String>) -> Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.input.clone());
    let found = tables::collect_artifacts(&args.input)?;
    let mut input_paths: Vec<&PathBuf> = Vec::new();
    for p in &found.paths {
        input_paths.push(p);
    }
    let manifest = build_manifest(
        "report",
        argv,
        serde_json::json!({
            "in": args.input.to_string_lossy(),
            "format": args.format,
            "out": out_dir.to_string_lossy(),
        }),
        BTreeMap::new(),
        &input_paths,
    )?;
    let rendered = tables::build_all_tables(&found)?;
    let written =
        crate::report::emit_tables(&rendered, format, &out_dir, &manifest.manifest_id)?;
    // plot-ready series are always emitted alongside the tables
    let mut plot_paths = Vec::new();
    if let Some(dose) = &found.dose {
        let path = out_dir.join("dose_curve.csv");
        write_atomic(
            &path,
            tables::dose_series(&dose.curve).to_csv(&manifest.manifest_id)?.as_bytes(),
        )?;
        plot_paths.push(path);
    }
    if let Some(probe) = &found.probe {
        let path = out_dir.join("gap_bars.csv");
        write_atomic(
            &path,
            tables::gap_bars(probe).to_csv(&manifest.manifest_id)?.as_bytes(),
        )?;
        plot_paths.push(path);
    }
    manifest.save(&out_dir.join("report.manifest.json"))?;
    for p in written.iter().chain(&plot_paths) {
        println!("wrote {}", p.display());
    }
    Ok(())
}
