//! Line-delimited JSON trace files: one record per episode.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::language::ConceptVector;
use crate::world::ActionId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub episode_id: u64,
    pub seed: u64,
    pub config_digest: String,
    pub concept: ConceptVector,
    /// Message symbols per round of communication.
    pub messages: Vec<Vec<u64>>,
    /// Raw values of continuous messages, per round, when the channel is continuous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<Vec<Vec<Vec<f64>>>>,
    pub actions: Vec<ActionId>,
    pub reward: f64,
}

impl TraceRecord {
    /// All message symbols of the episode, rounds concatenated.
    pub fn message_sequence(&self) -> Vec<u64> {
        self.messages.iter().flatten().copied().collect()
    }

    /// Flattened continuous message values, if recorded.
    pub fn continuous_sequence(&self) -> Option<Vec<f64>> {
        self.continuous
            .as_ref()
            .map(|rounds| rounds.iter().flatten().flatten().copied().collect())
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Malformed { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Short hex digest identifying a serialized configuration.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

/// Writes records sorted by `episode_id` (stable for equal ids).
pub fn write_trace<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<(), TraceError> {
    let mut sorted: Vec<&TraceRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.episode_id);
    for r in sorted {
        serde_json::to_writer(&mut out, r).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads records; blank lines are skipped, malformed lines reported by 1-based number.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| TraceError::Malformed { line: i + 1, source })?;
        records.push(record);
    }
    Ok(records)
}
