//! Checkpoint container and file format.
//!
//! Layout: one JSON header line (format version, config, metadata, tensor
//! manifest with name/shape/dtype/byte offset), a newline, then the payload:
//! every tensor's values as little-endian f32 in manifest order. Tensors are
//! ordered by name and offsets must be exactly contiguous; any mismatch,
//! truncation, or shape disagreement with the config rejects the whole file.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::{InterventionSpec, ModelConfig};
use crate::model::forward::{run_forward, ForwardOutput};
use crate::model::params::{expected_shapes, Params, Tensor};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    #[serde(default)]
    meta: BTreeMap<String, String>,
    tensors: Vec<TensorEntry>,
}

/// A model: config plus parameters, immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Params,
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, params: Params) -> Result<Checkpoint> {
        config.validate()?;
        params.validate_shapes(&config)?;
        Ok(Checkpoint { config, params, meta: BTreeMap::new() })
    }

    /// Fresh random initialization from the config's seed.
    pub fn init(config: ModelConfig) -> Result<Checkpoint> {
        config.validate()?;
        let params = Params::init(&config, config.seed);
        Checkpoint::new(config, params)
    }

    /// Standard causal forward pass, optionally under an intervention.
    pub fn forward(
        &self,
        tokens: &[u32],
        intervention: Option<&InterventionSpec>,
    ) -> Result<ForwardOutput> {
        let (out, _) = run_forward(&self.config, &self.params, tokens, intervention, false)?;
        Ok(out)
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let named = self.params.named();
        let mut tensors = Vec::with_capacity(named.len());
        let mut offset: u64 = 0;
        for (name, t) in &named {
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: t.shape.clone(),
                dtype: "f32".to_string(),
                offset,
            });
            offset += 4 * t.len() as u64;
        }
        let header = Header {
            version: CHECKPOINT_FORMAT_VERSION,
            config: self.config,
            meta: self.meta.clone(),
            tensors,
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        let mut payload = Vec::with_capacity(offset as usize);
        for (_, t) in &named {
            for &v in &t.data {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.write_all(&payload)?;
        Ok(())
    }

    pub fn load<R: BufRead>(mut input: R) -> Result<Checkpoint> {
        let mut header_line = Vec::new();
        input.read_until(b'\n', &mut header_line)?;
        if header_line.last() != Some(&b'\n') {
            return Err(Error::Checkpoint("missing header line".into()));
        }
        let header: Header = serde_json::from_slice(&header_line)
            .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;
        if header.version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {} unsupported (expected {CHECKPOINT_FORMAT_VERSION})",
                header.version
            )));
        }
        header.config.validate()?;

        let expected = expected_shapes(&header.config);
        if header.tensors.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "manifest lists {} tensors, config expects {}",
                header.tensors.len(),
                expected.len()
            )));
        }
        let mut offset: u64 = 0;
        for (entry, (name, shape)) in header.tensors.iter().zip(&expected) {
            if &entry.name != name {
                return Err(Error::Checkpoint(format!(
                    "manifest tensor {:?} out of order or unknown (expected {name:?})",
                    entry.name
                )));
            }
            if &entry.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?} inconsistent with config ({shape:?})",
                    entry.shape
                )));
            }
            if entry.dtype != "f32" {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has unsupported dtype {:?}",
                    entry.dtype
                )));
            }
            if entry.offset != offset {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} declares offset {}, expected {offset}",
                    entry.offset
                )));
            }
            offset += 4 * shape.iter().product::<usize>() as u64;
        }

        let mut payload = Vec::new();
        input.read_to_end(&mut payload)?;
        if payload.len() as u64 != offset {
            return Err(Error::Checkpoint(format!(
                "payload holds {} bytes, manifest requires {offset}",
                payload.len()
            )));
        }

        let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            let start = entry.offset as usize;
            let data: Vec<f64> = payload[start..start + 4 * n]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            tensors.insert(entry.name.clone(), Tensor { shape: entry.shape.clone(), data });
        }
        let params = params_from_named(&header.config, tensors)?;
        Ok(Checkpoint { config: header.config, params, meta: header.meta })
    }

    pub fn save_to_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        crate::report::write_atomic(path.as_ref(), &buf)
    }

    pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)?;
        Checkpoint::load(std::io::BufReader::new(file))
    }
}

fn params_from_named(
    config: &ModelConfig,
    mut tensors: BTreeMap<String, Tensor>,
) -> Result<Params> {
    let mut take = |name: &str| -> Result<Tensor> {
        tensors
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    };
    let mut layers = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let pre = format!("layer{l}");
        layers.push(crate::model::params::LayerParams {
            ln1_gain: take(&format!("{pre}.ln1_gain"))?,
            ln1_bias: take(&format!("{pre}.ln1_bias"))?,
            w_q: take(&format!("{pre}.w_q"))?,
            b_q: take(&format!("{pre}.b_q"))?,
            w_k: take(&format!("{pre}.w_k"))?,
            w_v: take(&format!("{pre}.w_v"))?,
            b_v: take(&format!("{pre}.b_v"))?,
            w_o: take(&format!("{pre}.w_o"))?,
            b_o: take(&format!("{pre}.b_o"))?,
            ln2_gain: take(&format!("{pre}.ln2_gain"))?,
            ln2_bias: take(&format!("{pre}.ln2_bias"))?,
            w_fc: take(&format!("{pre}.w_fc"))?,
            b_fc: take(&format!("{pre}.b_fc"))?,
            w_proj: take(&format!("{pre}.w_proj"))?,
            b_proj: take(&format!("{pre}.b_proj"))?,
        });
    }
    let params = Params {
        tok_embed: take("tok_embed")?,
        pos_embed: take("pos_embed")?,
        layers,
        lnf_gain: take("lnf_gain")?,
        lnf_bias: take("lnf_bias")?,
    };
    params.validate_shapes(config)?;
    Ok(params)
}
