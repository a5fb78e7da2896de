//! Run manifests, atomic file output, and report rendering.
//!
//! Every CLI run writes a manifest: command, argv, full configuration
//! snapshot, seeds, and input digests. The manifest id is a digest over the
//! deterministic fields (the wall-clock timestamp is excluded), and every
//! artifact embeds that id, so re-running a command reproduces its outputs
//! byte for byte.
//!
//! Reports are flat tables rendered to CSV (full precision, re-parseable),
//! JSON (full precision), or Markdown (4 significant digits).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    crate::world::vocab::hex_string(&hasher.finalize())
}

pub fn file_digest<P: AsRef<Path>>(path: P) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Write via a temp file in the same directory plus rename, so readers never
/// observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other("path has no file name")))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Record of one CLI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub artifact_version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// input path -> sha256 of its bytes
    pub inputs: BTreeMap<String, String>,
    pub unix_time: u64,
    pub manifest_id: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        argv: Vec<String>,
        config: serde_json::Value,
        seeds: BTreeMap<String, u64>,
        inputs: BTreeMap<String, String>,
    ) -> RunManifest {
        let mut m = RunManifest {
            command: command.to_string(),
            argv,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seeds,
            inputs,
            unix_time: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            manifest_id: String::new(),
        };
        m.manifest_id = m.compute_id();
        m
    }

    /// Digest over the run-determining fields; excludes the timestamp.
    pub fn compute_id(&self) -> String {
        let deterministic = serde_json::json!({
            "command": self.command,
            "argv": self.argv,
            "artifact_version": self.artifact_version,
            "config": self.config,
            "seeds": self.seeds,
            "inputs": self.inputs,
        });
        sha256_hex(deterministic.to_string().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }
}

/// One table cell: integer, float, or text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn to_csv_field(&self) -> Result<String> {
        match self {
            Cell::Int(v) => Ok(v.to_string()),
            Cell::Num(v) => Ok(format_f64_roundtrip(*v)),
            Cell::Text(s) => {
                if s.contains(',') || s.contains('\n') || s.contains('"') {
                    return Err(Error::Schema(format!(
                        "text cell {s:?} contains CSV delimiters"
                    )));
                }
                Ok(s.clone())
            }
        }
    }

    fn from_csv_field(s: &str) -> Cell {
        if let Ok(i) = s.parse::<i64>() {
            return Cell::Int(i);
        }
        if let Ok(f) = s.parse::<f64>() {
            return Cell::Num(f);
        }
        Cell::Text(s.to_string())
    }

    fn to_markdown(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => fmt_sig(*v, 4),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Shortest representation that parses back to the identical f64; integral
/// values keep a trailing `.0` so they stay floats across a CSV round trip.
pub fn format_f64_roundtrip(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Render with `sig` significant digits (Markdown output).
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-4..=8).contains(&exp) {
        format!("{:.*e}", sig.saturating_sub(1), v)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    }
}

/// A named flat table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema(format!("table {} has no columns", self.name)));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::Schema(format!(
                    "table {}: row {i} has {} cells for {} columns",
                    self.name,
                    row.len(),
                    self.columns.len()
                )));
            }
        }
        Ok(())
    }

    /// CSV with a manifest reference comment line and a header row.
    pub fn to_csv(&self, manifest_id: &str) -> Result<String> {
        self.validate()?;
        let mut out = String::new();
        out.push_str(&format!("# manifest_id={manifest_id}\n"));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Result<Vec<String>> = row.iter().map(Cell::to_csv_field).collect();
            out.push_str(&fields?.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    /// Parse a table back from its CSV rendering.
    pub fn from_csv(name: &str, text: &str) -> Result<Table> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema("CSV has no header row".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.to_string()).collect();
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            rows.push(line.split(',').map(Cell::from_csv_field).collect());
        }
        let table = Table { name: name.to_string(), columns, rows };
        table.validate()?;
        Ok(table)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("### {}\n\n", self.name));
        out.push_str(&format!("| {} |\n", self.columns.join(" | ")));
        out.push_str(&format!(
            "|{}\n",
            self.columns.iter().map(|_| "---|").collect::<String>()
        ));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_markdown).collect();
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
        out
    }
}

/// Output format of the `report` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<ReportFormat> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" => Ok(ReportFormat::Md),
            other => Err(Error::Config(format!(
                "unknown report format {other:?} (expected csv, json, or md)"
            ))),
        }
    }
}

/// Write tables in the requested format; returns the paths written. Tables
/// without rows still produce valid files with headers.
pub fn emit_tables(
    tables: &[Table],
    format: ReportFormat,
    out_dir: &Path,
    manifest_id: &str,
) -> Result<Vec<PathBuf>> {
    for t in tables {
        t.validate()?;
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = out_dir.join("report.json");
            let doc = serde_json::json!({ "manifest_id": manifest_id, "tables": tables });
            let mut bytes = serde_json::to_vec_pretty(&doc)?;
            bytes.push(b'\n');
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        ReportFormat::Csv => {
            for t in tables {
                let path = out_dir.join(format!("{}.csv", t.name));
                write_atomic(&path, t.to_csv(manifest_id)?.as_bytes())?;
                written.push(path);
            }
        }
        ReportFormat::Md => {
            let path = out_dir.join("report.md");
            let mut out = String::from("# Results\n\n");
            for t in tables {
                out.push_str(&t.to_markdown());
                out.push('\n');
            }
            out.push_str(&format!("_manifest: {manifest_id}_\n"));
            write_atomic(&path, out.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}
