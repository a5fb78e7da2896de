//! Head-set argument handling shared by the intervention subcommands.

use std::path::Path;

use crate::discovery::HeadCandidate;
use crate::error::{Error, Result};
use crate::model::config::HeadId;

/// Parse an inline head list like "L1H3,L2H0".
pub fn parse_heads_arg(spec: &str) -> Result<Vec<HeadId>> {
    let mut heads = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let rest = part
            .strip_prefix('L')
            .ok_or_else(|| Error::Config(format!("bad head {part:?}, expected LxHy")))?;
        let (layer, head) = rest
            .split_once('H')
            .ok_or_else(|| Error::Config(format!("bad head {part:?}, expected LxHy")))?;
        let layer = layer
            .parse()
            .map_err(|_| Error::Config(format!("bad layer index in {part:?}")))?;
        let head = head
            .parse()
            .map_err(|_| Error::Config(format!("bad head index in {part:?}")))?;
        heads.push(HeadId::new(layer, head));
    }
    if heads.is_empty() {
        return Err(Error::Config("empty head list".into()));
    }
    Ok(heads)
}

/// Candidate-file payload written by `discover`.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct CandidateArtifact {
    pub manifest_id: String,
    pub kind: String,
    pub model_config: crate::model::config::ModelConfig,
    pub candidates: Vec<HeadCandidate>,
}

pub fn load_heads_file(path: &Path, top: Option<usize>) -> Result<Vec<HeadId>> {
    let text = std::fs::read_to_string(path)?;
    let artifact: CandidateArtifact = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let mut heads: Vec<HeadId> = artifact.candidates.iter().map(|c| c.head_id()).collect();
    if let Some(n) = top {
        heads.truncate(n);
    }
    if heads.is_empty() {
        return Err(Error::Config(format!(
            "{} holds no candidate heads",
            path.display()
        )));
    }
    Ok(heads)
}

pub fn resolve(selection: &super::HeadSelection) -> Result<Vec<HeadId>> {
    match (&selection.heads, &selection.heads_file) {
        (Some(spec), None) => {
            let mut heads = parse_heads_arg(spec)?;
            if let Some(n) = selection.top {
                heads.truncate(n);
            }
            Ok(heads)
        }
        (None, Some(path)) => load_heads_file(path, selection.top),
        _ => Err(Error::Config(
            "provide exactly one of --heads or --heads-file".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_parse() {
        let heads = parse_heads_arg("L1H3,L2H0").unwrap();
        assert_eq!(heads, vec![HeadId::new(1, 3), HeadId::new(2, 0)]);
        assert!(parse_heads_arg("1H3").is_err());
        assert!(parse_heads_arg("LxHy").is_err());
        assert!(parse_heads_arg("").is_err());
    }
}
