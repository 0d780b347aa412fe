//! Completion rewards and group-relative advantages.
//!
//! Every completion gets two generic rewards (think-tag format and
//! reasoning length) and one task reward chosen by the record's answer
//! type. The total is a weighted sum, unweighted by default.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::parse_smiles;
use crate::task::{AnswerType, TaskError, TaskRecord};

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

/// Reasoning length (in characters) at which `reward_think` saturates is
/// twice this.
pub const THINK_SCALE: f64 = 2500.0;
/// Completions per prompt in a training group.
pub const DEFAULT_GROUP_SIZE: usize = 8;
/// Stabilizer added to the group standard deviation.
pub const ADVANTAGE_EPS: f64 = 1e-8;
/// Trainer settings carried for downstream consumers; nothing here uses them.
pub const KL_BETA: f64 = 0.4;
pub const SAMPLING_TEMPERATURE: f64 = 1.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("degenerate answer range ({min}, {max})")]
    DegenerateRange { min: f64, max: f64 },
    #[error("group of {size} completions; at least 2 are needed")]
    GroupTooSmall { size: usize },
}

/// Byte range into [`Completion::raw`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// A raw model output with its reasoning and answer located.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub raw: String,
    pub think_span: Option<Span>,
    pub answer_span: Option<Span>,
}

/// Content between the first `open` at or after `from` and the next `close`.
fn block(raw: &str, open: &str, close: &str, from: usize) -> Option<Span> {
    let start = raw[from..].find(open)? + from + open.len();
    let end = raw[start..].find(close)? + start;
    Some(Span { start, end })
}

impl Completion {
    /// Reasoning is the text inside the first closed think block. The
    /// answer is the first closed answer block after it (or anywhere, when
    /// there is no reasoning).
    pub fn parse(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let think_span = block(&raw, THINK_OPEN, THINK_CLOSE, 0);
        let after = think_span.map_or(0, |s| s.end + THINK_CLOSE.len());
        let answer_span = block(&raw, ANSWER_OPEN, ANSWER_CLOSE, after);
        Completion {
            raw,
            think_span,
            answer_span,
        }
    }

    pub fn think(&self) -> &str {
        self.think_span.map_or("", |s| &self.raw[s.start..s.end])
    }

    /// The answer text, trimmed; empty when there is no answer block.
    pub fn answer(&self) -> &str {
        self.answer_span.map_or("", |s| self.raw[s.start..s.end].trim())
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// −1 plus one for exactly one think opener plus one for exactly one closer.
pub fn reward_format(raw: &str) -> f64 {
    -1.0 + indicator(raw.matches(THINK_OPEN).count() == 1) + indicator(raw.matches(THINK_CLOSE).count() == 1)
}

/// Grows linearly with reasoning length, from −1 at none to 1 at 5000
/// characters.
pub fn reward_think(c: &Completion) -> f64 {
    let n = c.think().chars().count() as f64;
    f64::min(1.0, -1.0 + n / THINK_SCALE)
}

fn lengths_close(a: &str, g: &str) -> bool {
    a.chars().count().abs_diff(g.chars().count()) < 3
}

/// 1 for the exact label, 0 for a wrong label of similar length, −1 for
/// anything longer.
pub fn reward_classification(answer: &str, truth: &str) -> f64 {
    let (a, g) = (answer.trim(), truth.trim());
    indicator(lengths_close(a, g)) + indicator(a == g) - 1.0
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Length gate minus the range-normalized absolute error. Answers that do
/// not parse as a finite number score −1.
pub fn reward_regression(answer: &str, truth: &str, range: (f64, f64)) -> Result<f64, RewardError> {
    let (min, max) = range;
    if !(min.is_finite() && max.is_finite() && max > min) {
        return Err(RewardError::DegenerateRange { min, max });
    }
    let (a, g) = (answer.trim(), truth.trim());
    let gv = parse_number(g).ok_or_else(|| TaskError::NonNumericAnswer {
        task_id: String::new(),
        answer: truth.to_string(),
    })?;
    Ok(match parse_number(a) {
        Some(av) => indicator(lengths_close(a, g)) - (av - gv).abs() / (max - min),
        None => -1.0,
    })
}

/// +1 for a valid molecule, or, with a ground-truth set, for a member of
/// it; −1 otherwise. `ground_truth` must hold canonical SMILES.
pub fn reward_generation(answer: &str, ground_truth: Option<&[String]>) -> f64 {
    let parsed = parse_smiles(answer.trim()).ok().filter(|m| !m.is_empty());
    let hit = match (parsed, ground_truth) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(m), Some(set)) => {
            let canon = m.to_canonical_smiles();
            set.iter().any(|g| *g == canon)
        }
    };
    2.0 * indicator(hit) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub format: f64,
    pub think: f64,
    pub task: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            format: 1.0,
            think: 1.0,
            task: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub r_format: f64,
    pub r_think: f64,
    pub r_task: f64,
    pub total: f64,
    /// Named components, including which task reward was applied.
    pub components: BTreeMap<String, f64>,
}

/// Scores `c` against `rec` with unit weights.
pub fn score(rec: &TaskRecord, c: &Completion) -> Result<RewardReport, RewardError> {
    score_weighted(rec, c, &RewardWeights::default())
}

pub fn score_weighted(rec: &TaskRecord, c: &Completion, w: &RewardWeights) -> Result<RewardReport, RewardError> {
    rec.validate()?;
    let r_format = reward_format(&c.raw);
    let r_think = reward_think(c);
    let (name, r_task) = match &rec.answer_type {
        AnswerType::Classification { .. } => ("r_qa", reward_classification(c.answer(), &rec.answer)),
        AnswerType::Regression { range } => ("r_reg", reward_regression(c.answer(), &rec.answer, *range)?),
        AnswerType::Generation { ground_truth: None } => ("r_gen_only", reward_generation(c.answer(), None)),
        AnswerType::Generation { ground_truth: Some(_) } => {
            let set = rec.canonical_ground_truth().unwrap_or_default();
            ("r_gen_gt", reward_generation(c.answer(), Some(&set)))
        }
    };
    let components = BTreeMap::from([
        ("r_format".to_string(), r_format),
        ("r_think".to_string(), r_think),
        (name.to_string(), r_task),
    ]);
    Ok(RewardReport {
        r_format,
        r_think,
        r_task,
        total: w.format * r_format + w.think * r_think + w.task * r_task,
        components,
    })
}

/// `(r - mean) / (std + eps)` with the population standard deviation.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, RewardError> {
    if rewards.len() < 2 {
        return Err(RewardError::GroupTooSmall { size: rewards.len() });
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + ADVANTAGE_EPS;
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// The completions sampled for one prompt, with their total rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub completions: Vec<(Completion, f64)>,
}

impl Group {
    pub fn advantages(&self) -> Result<Vec<f64>, RewardError> {
        let rewards: Vec<f64> = self.completions.iter().map(|(_, r)| *r).collect();
        group_advantages(&rewards)
    }
}

/// One line of a batch scoring file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub task: TaskRecord,
    pub completion: String,
}

impl ScoreRequest {
    pub fn score(&self, w: &RewardWeights) -> Result<RewardReport, RewardError> {
        score_weighted(&self.task, &Completion::parse(self.completion.as_str()), w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_are_substrings() {
        let c = Completion::parse("<think>abc</think> <answer> True </answer>");
        assert_eq!(c.think(), "abc");
        assert_eq!(c.answer(), "True");
        let s = c.answer_span.unwrap();
        assert_eq!(&c.raw[s.start..s.end], " True ");
        // An answer block inside the reasoning is not the answer.
        let c = Completion::parse("<think><answer>A</answer></think>");
        assert_eq!(c.answer_span, None);
        assert_eq!(Completion::parse("<answer>B").answer(), "");
    }

    #[test]
    fn advantages() {
        assert_eq!(group_advantages(&[1.0; 4]).unwrap(), vec![0.0; 4]);
        let a = group_advantages(&[0.0, 2.0]).unwrap();
        assert!((a[0] + 1.0).abs() < 1e-7 && (a[1] - 1.0).abs() < 1e-7);
        assert_eq!(group_advantages(&[1.0]), Err(RewardError::GroupTooSmall { size: 1 }));
    }

    #[test]
    fn degenerate_range() {
        assert!(matches!(
            reward_regression("1", "1", (2.0, 2.0)),
            Err(RewardError::DegenerateRange { .. })
        ));
    }
}
