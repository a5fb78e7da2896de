//! On-disk JSON artifacts written by the subcommands and consumed by
//! `report`. Every artifact carries the manifest id of the run that
//! produced it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discovery::HeadCandidate;
use crate::error::{Error, Result};
use crate::experiments::{
    BaselineReport, DissociationReport, DoseCurve, KnockoutReport, NullDistribution,
    SteeringReport,
};
use crate::model::config::{HeadId, ModelConfig};
use crate::report::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateArtifact {
    pub manifest_id: String,
    pub kind: String,
    pub model_config: ModelConfig,
    pub candidates: Vec<HeadCandidate>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KnockoutArtifact {
    pub manifest_id: String,
    pub kind: String,
    pub heads: Vec<HeadId>,
    pub baseline: BaselineReport,
    pub r_to_item: KnockoutReport,
    pub u_to_item: KnockoutReport,
    pub per_head_r: Vec<(HeadId, KnockoutReport)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DoseArtifact {
    pub manifest_id: String,
    pub kind: String,
    pub curve: DoseCurve,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SteerArtifact {
    pub manifest_id: String,
    pub kind: String,
    pub report: SteeringReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProbeArtifact {
    pub manifest_id: String,
    pub kind: String,
    pub r_to_item: DissociationReport,
    pub u_to_item: DissociationReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NullArtifact {
    pub manifest_id: String,
    pub kind: String,
    pub null: NullDistribution,
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}
