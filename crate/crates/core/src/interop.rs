//! JSON-string entry points for foreign-language callers.
//!
//! Every function takes and returns JSON text (or plain integers and
//! strings) so a binding layer only has to move strings across the
//! boundary. Each one delegates to the native operation; errors carry a
//! stable `kind` plus the native message.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::rewards::{self, Completion, RewardWeights};
use crate::sampler::{Registry, Sampler};
use crate::task::TaskRecord;
use crate::tokenizer::{self, AugmentationPolicy, Vocabulary};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind}: {message}")]
pub struct InteropError {
    /// `SchemaError` for malformed input JSON, otherwise the failing
    /// native operation (`TokenizeError`, `RewardError`, ...).
    pub kind: &'static str,
    pub message: String,
}

impl InteropError {
    fn schema(e: impl ToString) -> Self {
        InteropError {
            kind: "SchemaError",
            message: e.to_string(),
        }
    }

    fn native(kind: &'static str, e: impl ToString) -> Self {
        InteropError {
            kind,
            message: e.to_string(),
        }
    }

    /// `{"error": kind, "message": ...}`.
    pub fn to_json(&self) -> String {
        json!({"error": self.kind, "message": self.message}).to_string()
    }
}

pub type Result<T> = std::result::Result<T, InteropError>;

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn parse_task(task_json: &str) -> Result<TaskRecord> {
    let rec: TaskRecord = serde_json::from_str(task_json).map_err(InteropError::schema)?;
    rec.validate().map_err(InteropError::schema)?;
    Ok(rec)
}

/// `{"ids": [...], "spans": [...]}`.
pub fn tokenize(vocab: &Vocabulary, text: &str, isolate_inputs: bool) -> Result<String> {
    let seq = tokenizer::tokenize(text, vocab, isolate_inputs).map_err(|e| InteropError::native("TokenizeError", e))?;
    Ok(to_json(&seq))
}

/// Takes a JSON array of ids and returns the text as a JSON string.
pub fn detokenize(vocab: &Vocabulary, ids_json: &str) -> Result<String> {
    let ids: Vec<u32> = serde_json::from_str(ids_json).map_err(InteropError::schema)?;
    detokenize_ids(vocab, &ids).map(|s| to_json(&s))
}

/// Flat-array variant of [`detokenize`] returning the raw text.
pub fn detokenize_ids(vocab: &Vocabulary, ids: &[u32]) -> Result<String> {
    tokenizer::detokenize(ids, vocab).map_err(|e| InteropError::native("DetokenizeError", e))
}

/// Augments one record under `policy_json` (an empty string means the
/// default policy) with a ChaCha8 stream seeded by `seed`.
pub fn augment_record(record_json: &str, policy_json: &str, seed: u64) -> Result<String> {
    let rec = parse_task(record_json)?;
    let policy: AugmentationPolicy = if policy_json.trim().is_empty() {
        AugmentationPolicy::default()
    } else {
        serde_json::from_str(policy_json).map_err(InteropError::schema)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = tokenizer::augment_record(&rec, &policy, &mut rng).map_err(|e| InteropError::native("AugmentError", e))?;
    Ok(to_json(&out))
}

/// The first `n` records of the seeded batch stream, as a JSON array.
pub fn sample_batch(registry: &Registry, n: usize, seed: u64) -> Result<String> {
    let batch = Sampler::new(registry, seed)
        .next_batch(n)
        .map_err(|e| InteropError::native("SamplerError", e))?;
    Ok(to_json(&batch))
}

/// Scores one completion; `weights_json` may be empty for unit weights.
pub fn score(task_json: &str, completion: &str, weights_json: &str) -> Result<String> {
    let rec = parse_task(task_json)?;
    let weights: RewardWeights = if weights_json.trim().is_empty() {
        RewardWeights::default()
    } else {
        serde_json::from_str(weights_json).map_err(InteropError::schema)?
    };
    let report = rewards::score_weighted(&rec, &Completion::parse(completion), &weights)
        .map_err(|e| InteropError::native("RewardError", e))?;
    Ok(to_json(&report))
}

/// Takes and returns a JSON array of floats.
pub fn group_advantages(rewards_json: &str) -> Result<String> {
    let r: Vec<f64> = serde_json::from_str(rewards_json).map_err(InteropError::schema)?;
    group_advantages_flat(&r).map(|a| to_json(&a))
}

pub fn group_advantages_flat(rewards: &[f64]) -> Result<Vec<f64>> {
    rewards::group_advantages(rewards).map_err(|e| InteropError::native("RewardError", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_are_tagged() {
        let e = score("{", "", "").unwrap_err();
        assert_eq!(e.kind, "SchemaError");
        assert!(e.to_json().starts_with(r#"{"error":"SchemaError""#));
        assert_eq!(group_advantages("[1.0]").unwrap_err().kind, "RewardError");
    }
}
