//! Benchmark bundle and its JSON-lines format.
//!
//! One file carries everything an experiment needs: a versioned header (seed,
//! counts, vocabulary digest), the catalog, one line per factorial pair, and
//! one line per steering question. Loading re-validates the pair invariants
//! so a corrupted or hand-edited file is rejected before any experiment runs.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::catalog::{build_catalog, Catalog};
use crate::world::pairs::{
    make_factorial_pairs, make_steering_eval, validate_pairs, FactorialPair, SteeringQuestion,
};
use crate::world::vocab::Vocab;

pub const BENCHMARK_FORMAT_VERSION: u32 = 1;

/// Generation parameters for a benchmark bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchParams {
    pub seed: u64,
    pub n_identities: usize,
    pub n_linked_items: usize,
    pub n_neutral_items: usize,
    pub n_groups: usize,
    pub pairs_per_item: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            seed: 7,
            n_identities: 16,
            n_linked_items: 16,
            n_neutral_items: 8,
            n_groups: 4,
            pairs_per_item: 5,
        }
    }
}

/// First line of a benchmark file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchHeader {
    pub version: u32,
    pub params: BenchParams,
    pub n_pairs: usize,
    pub n_steering_questions: usize,
    pub vocab_hash: String,
    #[serde(default)]
    pub manifest_id: String,
}

/// A complete benchmark: catalog, factorial pairs, steering eval set.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub header: BenchHeader,
    pub catalog: Catalog,
    pub pairs: Vec<FactorialPair>,
    pub steering: Vec<SteeringQuestion>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum BenchLine {
    Header(BenchHeader),
    Catalog(Catalog),
    Pair(FactorialPair),
    SteeringQuestion(SteeringQuestion),
}

/// Build a benchmark bundle from parameters.
pub fn generate_benchmark(params: BenchParams) -> Result<Benchmark> {
    let catalog = build_catalog(
        params.seed,
        params.n_identities,
        params.n_linked_items,
        params.n_neutral_items,
        params.n_groups,
    )?;
    let pairs = make_factorial_pairs(&catalog, params.pairs_per_item, params.seed)?;
    validate_pairs(&catalog, &pairs)?;
    let steering = make_steering_eval(&catalog, &pairs, params.seed)?;
    let header = BenchHeader {
        version: BENCHMARK_FORMAT_VERSION,
        params,
        n_pairs: pairs.len(),
        n_steering_questions: steering.len(),
        vocab_hash: Vocab::shared().hash(),
        manifest_id: String::new(),
    };
    Ok(Benchmark { header, catalog, pairs, steering })
}

/// Serialize a benchmark to JSON lines.
pub fn write_benchmark<W: Write>(bench: &Benchmark, mut out: W) -> Result<()> {
    let mut write_line = |line: &BenchLine| -> Result<()> {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    write_line(&BenchLine::Header(bench.header.clone()))?;
    write_line(&BenchLine::Catalog(bench.catalog.clone()))?;
    for p in &bench.pairs {
        write_line(&BenchLine::Pair(p.clone()))?;
    }
    for q in &bench.steering {
        write_line(&BenchLine::SteeringQuestion(q.clone()))?;
    }
    Ok(())
}

/// Parse and validate a benchmark from JSON lines.
pub fn read_benchmark<R: BufRead>(input: R) -> Result<Benchmark> {
    let mut header: Option<BenchHeader> = None;
    let mut catalog: Option<Catalog> = None;
    let mut pairs: Vec<FactorialPair> = Vec::new();
    let mut steering: Vec<SteeringQuestion> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: BenchLine = serde_json::from_str(&line).map_err(|e| {
            Error::Schema(format!("benchmark line {}: {e}", lineno + 1))
        })?;
        match parsed {
            BenchLine::Header(h) => {
                if h.version != BENCHMARK_FORMAT_VERSION {
                    return Err(Error::Schema(format!(
                        "benchmark format version {} unsupported (expected {BENCHMARK_FORMAT_VERSION})",
                        h.version
                    )));
                }
                if h.vocab_hash != Vocab::shared().hash() {
                    return Err(Error::Schema(
                        "benchmark was generated against a different vocabulary".into(),
                    ));
                }
                header = Some(h);
            }
            BenchLine::Catalog(c) => catalog = Some(c),
            BenchLine::Pair(p) => pairs.push(p),
            BenchLine::SteeringQuestion(q) => steering.push(q),
        }
    }
    let header = header.ok_or_else(|| Error::Schema("benchmark file has no header line".into()))?;
    let catalog = catalog.ok_or_else(|| Error::Schema("benchmark file has no catalog line".into()))?;
    if header.n_pairs != pairs.len() {
        return Err(Error::Schema(format!(
            "header declares {} pairs, file has {}",
            header.n_pairs,
            pairs.len()
        )));
    }
    catalog.validate()?;
    validate_pairs(&catalog, &pairs)?;
    Ok(Benchmark { header, catalog, pairs, steering })
}

/// First line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub version: u32,
    pub seed: u64,
    pub repeats: usize,
    pub n_sequences: usize,
    pub vocab_hash: String,
    #[serde(default)]
    pub manifest_id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum CorpusLine {
    Header(CorpusHeader),
    Seq { tokens: Vec<u32> },
}

/// Serialize a training corpus to JSON lines.
pub fn write_corpus<W: Write>(
    corpus: &crate::world::corpus::Corpus,
    manifest_id: &str,
    mut out: W,
) -> Result<()> {
    let header = CorpusHeader {
        version: BENCHMARK_FORMAT_VERSION,
        seed: corpus.seed,
        repeats: corpus.repeats,
        n_sequences: corpus.sequences.len(),
        vocab_hash: Vocab::shared().hash(),
        manifest_id: manifest_id.to_string(),
    };
    serde_json::to_writer(&mut out, &CorpusLine::Header(header))?;
    out.write_all(b"\n")?;
    for tokens in &corpus.sequences {
        serde_json::to_writer(&mut out, &CorpusLine::Seq { tokens: tokens.clone() })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a training corpus from JSON lines.
pub fn read_corpus<R: BufRead>(input: R) -> Result<crate::world::corpus::Corpus> {
    let mut header: Option<CorpusHeader> = None;
    let mut sequences = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("corpus line {}: {e}", lineno + 1)))?;
        match parsed {
            CorpusLine::Header(h) => {
                if h.version != BENCHMARK_FORMAT_VERSION {
                    return Err(Error::Schema(format!(
                        "corpus format version {} unsupported",
                        h.version
                    )));
                }
                if h.vocab_hash != Vocab::shared().hash() {
                    return Err(Error::Schema(
                        "corpus was generated against a different vocabulary".into(),
                    ));
                }
                header = Some(h);
            }
            CorpusLine::Seq { tokens } => sequences.push(tokens),
        }
    }
    let header = header.ok_or_else(|| Error::Schema("corpus file has no header line".into()))?;
    if header.n_sequences != sequences.len() {
        return Err(Error::Schema(format!(
            "header declares {} sequences, file has {}",
            header.n_sequences,
            sequences.len()
        )));
    }
    Ok(crate::world::corpus::Corpus {
        sequences,
        seed: header.seed,
        repeats: header.repeats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trip() {
        let catalog = build_catalog(7, 8, 8, 4, 2).unwrap();
        let corpus = crate::world::corpus::generate_training_corpus(&catalog, 2, 3).unwrap();
        let mut buf = Vec::new();
        write_corpus(&corpus, "m1", &mut buf).unwrap();
        let loaded = read_corpus(buf.as_slice()).unwrap();
        assert_eq!(corpus, loaded);
    }

    #[test]
    fn round_trip_is_lossless() {
        let bench = generate_benchmark(BenchParams::default()).unwrap();
        let mut buf = Vec::new();
        write_benchmark(&bench, &mut buf).unwrap();
        let loaded = read_benchmark(buf.as_slice()).unwrap();
        assert_eq!(bench, loaded);
    }

    #[test]
    fn serialization_is_byte_stable() {
        let a = generate_benchmark(BenchParams::default()).unwrap();
        let b = generate_benchmark(BenchParams::default()).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_benchmark(&a, &mut ba).unwrap();
        write_benchmark(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn corrupted_pair_rejected() {
        let mut bench = generate_benchmark(BenchParams::default()).unwrap();
        bench.pairs[0].mismatch_prompt[0] = bench.pairs[0].mismatch_prompt[0].wrapping_add(1);
        let mut buf = Vec::new();
        write_benchmark(&bench, &mut buf).unwrap();
        assert!(read_benchmark(buf.as_slice()).is_err());
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut bench = generate_benchmark(BenchParams::default()).unwrap();
        bench.header.version = 99;
        let mut buf = Vec::new();
        write_benchmark(&bench, &mut buf).unwrap();
        assert!(matches!(read_benchmark(buf.as_slice()), Err(Error::Schema(_))));
    }
}
