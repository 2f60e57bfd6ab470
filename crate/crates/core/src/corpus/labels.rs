use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::store::{read_json, write_json_atomic, StoreError};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("no rater scores")]
    NoScores,
    #[error("score {0} outside 0..=3")]
    ScoreOutOfRange(u8),
}

/// Interrater correctness judgement for one plausible patch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessLabel {
    pub bug_id: String,
    pub patch_hash: String,
    pub rater_scores: Vec<u8>,
    pub final_score: u8,
    pub correct: bool,
}

impl CorrectnessLabel {
    /// Combine rater scores. Agreeing raters give their common score. When
    /// they disagree, a score settled in discussion wins; otherwise the
    /// lowest score stands.
    pub fn from_ratings(
        bug_id: impl Into<String>,
        patch_hash: impl Into<String>,
        rater_scores: Vec<u8>,
        resolved: Option<u8>,
    ) -> Result<CorrectnessLabel, LabelError> {
        let bad = rater_scores.iter().chain(resolved.iter()).find(|s| **s > 3);
        if let Some(s) = bad {
            return Err(LabelError::ScoreOutOfRange(*s));
        }
        let min = *rater_scores.iter().min().ok_or(LabelError::NoScores)?;
        let agree = rater_scores.iter().all(|s| *s == min);
        let final_score = if agree { min } else { resolved.unwrap_or(min) };
        Ok(CorrectnessLabel {
            bug_id: bug_id.into(),
            patch_hash: patch_hash.into(),
            rater_scores,
            final_score,
            correct: final_score >= 2,
        })
    }
}

/// Content hash of a patch after stripping trailing whitespace from each
/// line and normalizing line endings to LF.
pub fn patch_hash(patch: &str) -> String {
    let unified = patch.replace("\r\n", "\n").replace('\r', "\n");
    let normalized: Vec<&str> = unified.lines().map(str::trim_end).collect();
    let text = normalized.join("\n");
    hex::encode(Sha256::digest(text.trim_end_matches('\n').as_bytes()))
}

pub fn load_labels(path: &Path) -> Result<Vec<CorrectnessLabel>, StoreError> {
    read_json(path)
}

pub fn save_labels(path: &Path, labels: &[CorrectnessLabel]) -> Result<(), StoreError> {
    write_json_atomic(path, &labels)
}
