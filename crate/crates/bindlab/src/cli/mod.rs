//! Command-line interface.
//!
//! One subcommand per pipeline stage:
//! `gen-bench`, `train-toy`, `discover`, `knockout`, `dose`, `steer`,
//! `probe`, `random-baseline`, `report`. Every run writes a manifest beside
//! its outputs; outputs embed the manifest id and are byte-identical across
//! re-runs of the same command line. Exit codes: 0 success, 1 validation
//! error, 2 runtime failure.

mod artifacts;
mod commands;
mod heads;
mod tables;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::report::RunManifest;

pub use heads::parse_heads_arg;

#[derive(Debug, Parser)]
#[command(name = "bindlab", version, about = "Identity-item binding-head laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the benchmark bundle (catalog, factorial pairs, steering
    /// questions) and optionally the training corpus
    GenBench(GenBenchArgs),
    /// Train the toy model on a generated corpus
    TrainToy(TrainToyArgs),
    /// Extract binding features and select candidate heads
    Discover(DiscoverArgs),
    /// Edge knockout: R->item, U->item control, and per-head effects
    Knockout(KnockoutArgs),
    /// Dose-response of binding strength across an alpha grid
    Dose(DoseArgs),
    /// Generation-time steering accuracies across an alpha grid
    Steer(SteerArgs),
    /// Knowledge probe: binding versus knowledge under the same knockout
    Probe(ProbeArgs),
    /// Null distribution from layer-matched random head sets
    RandomBaseline(RandomBaselineArgs),
    /// Render collected artifacts as paper-style tables
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenBenchArgs {
    /// Root seed for the world, pairs, and steering set
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    identities: usize,
    #[arg(long = "items", default_value_t = 16)]
    linked_items: usize,
    #[arg(long, default_value_t = 8)]
    neutral_items: usize,
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, default_value_t = 5)]
    pairs_per_item: usize,
    /// Benchmark bundle output (JSON lines)
    #[arg(long)]
    out: PathBuf,
    /// Also write the training corpus here (JSON lines)
    #[arg(long)]
    corpus_out: Option<PathBuf>,
    /// Sentence repeats per association template in the corpus
    #[arg(long, default_value_t = 30)]
    repeats: usize,
}

#[derive(Debug, Args)]
struct TrainToyArgs {
    /// Optional TOML file with [model] and [train] sections; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training corpus (from gen-bench --corpus-out)
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint output path
    #[arg(long)]
    out: PathBuf,
    /// Loss trace CSV (default: <out>.loss.csv)
    #[arg(long)]
    loss_trace: Option<PathBuf>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    d_head: Option<usize>,
    #[arg(long)]
    max_seq: Option<usize>,
    #[arg(long)]
    model_seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// constant or cosine
    #[arg(long)]
    lr_schedule: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Debug, Args)]
struct DiscoverArgs {
    /// Benchmark bundle with the factorial pairs
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// Candidate list output (JSON)
    #[arg(long)]
    out: PathBuf,
    /// Fold-assignment seed
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Debug, Args)]
struct HeadSelection {
    /// Inline head list, e.g. "L1H3,L2H0"
    #[arg(long, group = "headsrc")]
    heads: Option<String>,
    /// Candidate file from `discover`
    #[arg(long, group = "headsrc")]
    heads_file: Option<PathBuf>,
    /// Keep only the top-N candidates from --heads-file
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Debug, Args)]
struct KnockoutArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    heads: HeadSelection,
    /// Output directory (knockout.json, knockout.csv, manifest)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DoseArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    heads: HeadSelection,
    /// Comma-separated alpha grid (must include 1)
    #[arg(long, default_value = "0,0.25,0.5,0.75,1,1.5,2,3")]
    alphas: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SteerArgs {
    /// Benchmark bundle with the steering questions
    #[arg(long)]
    bench: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    heads: HeadSelection,
    #[arg(long, default_value = "0,1,2,3,5")]
    alphas: String,
    /// Greedy decoding budget per question
    #[arg(long, default_value_t = 4)]
    max_steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    heads: HeadSelection,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RandomBaselineArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    heads: HeadSelection,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding the JSON artifacts of previous runs
    #[arg(long = "in")]
    input: PathBuf,
    /// csv, json, or md
    #[arg(long, default_value = "md")]
    format: String,
    /// Output directory (defaults to the input directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let argv_strings: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let outcome = match cli.command {
        Command::GenBench(args) => commands::gen_bench(args, argv_strings),
        Command::TrainToy(args) => commands::train_toy_cmd(args, argv_strings),
        Command::Discover(args) => commands::discover(args, argv_strings),
        Command::Knockout(args) => commands::knockout(args, argv_strings),
        Command::Dose(args) => commands::dose(args, argv_strings),
        Command::Steer(args) => commands::steer(args, argv_strings),
        Command::Probe(args) => commands::probe(args, argv_strings),
        Command::RandomBaseline(args) => commands::random_baseline(args, argv_strings),
        Command::Report(args) => commands::report(args, argv_strings),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn manifest_for(
    command: &str,
    argv: Vec<String>,
    config: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    input_paths: &[&PathBuf],
) -> Result<RunManifest> {
    let mut inputs = BTreeMap::new();
    for p in input_paths {
        inputs.insert(
            p.to_string_lossy().into_owned(),
            crate::report::file_digest(p)?,
        );
    }
    Ok(RunManifest::new(command, argv, config, seeds, inputs))
}

pub(crate) use manifest_for as build_manifest;
