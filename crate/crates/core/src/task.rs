//! Task records shared by sampling, augmentation, scoring and evaluation.
//!
//! One record is one example of one task: the prompt templates it can be
//! phrased with, the chemical entities substituted into them, and the
//! ground truth with its answer type.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::parse_smiles;

/// Textual format of a chemical entity. Also names the span tags
/// (`<smiles>`, `</smiles>`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Smiles,
    Selfies,
    Fasta,
    Protein,
    Iupac,
}

impl Format {
    pub const ALL: [Format; 5] = [Format::Smiles, Format::Selfies, Format::Fasta, Format::Protein, Format::Iupac];

    pub fn name(self) -> &'static str {
        match self {
            Format::Smiles => "smiles",
            Format::Selfies => "selfies",
            Format::Fasta => "fasta",
            Format::Protein => "protein",
            Format::Iupac => "iupac",
        }
    }

    pub fn open_tag(self) -> String {
        format!("<{}>", self.name())
    }

    pub fn close_tag(self) -> String {
        format!("</{}>", self.name())
    }

    /// Wraps `value` in this format's tags.
    pub fn wrap(self, value: &str) -> String {
        format!("<{0}>{1}</{0}>", self.name(), value)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named chemical or protein payload of a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub format: Format,
    pub value: String,
}

impl Entity {
    pub fn new(format: Format, value: impl Into<String>) -> Self {
        Entity {
            format,
            value: value.into(),
        }
    }

    /// The entity as it appears in a prompt, wrapped in its format tags.
    pub fn tagged(&self) -> String {
        self.format.wrap(&self.value)
    }
}

/// How a record's answer is judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerType {
    /// Choose one of `labels`.
    Classification { labels: Vec<String> },
    /// A number; `range` is (min, max) over the task's training answers.
    Regression { range: (f64, f64) },
    /// A molecule. With `ground_truth` the answer must be one of the listed
    /// molecules; without it any valid molecule is accepted.
    Generation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ground_truth: Option<Vec<String>>,
    },
}

impl AnswerType {
    pub fn kind(&self) -> &'static str {
        match self {
            AnswerType::Classification { .. } => "classification",
            AnswerType::Regression { .. } => "regression",
            AnswerType::Generation { .. } => "generation",
        }
    }
}

/// One example of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub category: String,
    pub task_id: String,
    pub prompt_templates: Vec<String>,
    #[serde(default)]
    pub entities: BTreeMap<String, Entity>,
    pub answer: String,
    pub answer_type: AnswerType,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("task {task_id}: no prompt templates")]
    NoTemplates { task_id: String },
    #[error("task {task_id}: template {template} lacks placeholder {{{name}}}")]
    MissingPlaceholder { task_id: String, template: usize, name: String },
    #[error("task {task_id}: answer {answer:?} is not one of the labels")]
    UnknownLabel { task_id: String, answer: String },
    #[error("task {task_id}: answer {answer:?} is not a finite number")]
    NonNumericAnswer { task_id: String, answer: String },
    #[error("task {task_id}: degenerate answer range ({min}, {max})")]
    DegenerateRange { task_id: String, min: f64, max: f64 },
    #[error("task {task_id}: ground-truth molecule {smiles:?} does not parse")]
    InvalidGroundTruth { task_id: String, smiles: String },
}

impl TaskRecord {
    /// Checks that the answer matches the answer type and that every
    /// template names every entity.
    pub fn validate(&self) -> Result<(), TaskError> {
        let task_id = || self.task_id.clone();
        if self.prompt_templates.is_empty() {
            return Err(TaskError::NoTemplates { task_id: task_id() });
        }
        for (i, template) in self.prompt_templates.iter().enumerate() {
            for name in self.entities.keys() {
                if !template.contains(&format!("{{{name}}}")) {
                    return Err(TaskError::MissingPlaceholder {
                        task_id: task_id(),
                        template: i,
                        name: name.clone(),
                    });
                }
            }
        }
        match &self.answer_type {
            AnswerType::Classification { labels } => {
                if !labels.iter().any(|l| l == self.answer.trim()) {
                    return Err(TaskError::UnknownLabel {
                        task_id: task_id(),
                        answer: self.answer.clone(),
                    });
                }
            }
            AnswerType::Regression { range: (min, max) } => {
                if !(min.is_finite() && max.is_finite() && max > min) {
                    return Err(TaskError::DegenerateRange {
                        task_id: task_id(),
                        min: *min,
                        max: *max,
                    });
                }
                match self.answer.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => {}
                    _ => {
                        return Err(TaskError::NonNumericAnswer {
                            task_id: task_id(),
                            answer: self.answer.clone(),
                        })
                    }
                }
            }
            AnswerType::Generation { ground_truth } => {
                for smiles in ground_truth.iter().flatten() {
                    if parse_smiles(smiles).is_err() {
                        return Err(TaskError::InvalidGroundTruth {
                            task_id: task_id(),
                            smiles: smiles.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical SMILES of the ground-truth set, if any. Entries that fail
    /// to parse are dropped (validation rejects them up front).
    pub fn canonical_ground_truth(&self) -> Option<Vec<String>> {
        match &self.answer_type {
            AnswerType::Generation {
                ground_truth: Some(set),
            } => Some(
                set.iter()
                    .filter_map(|s| parse_smiles(s).ok())
                    .map(|m| m.to_canonical_smiles())
                    .collect(),
            ),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> TaskRecord {
        serde_json::from_str(
            r#"{"category":"2d_molecule","task_id":"bbbp","prompt_templates":["Does {mol} cross?"],
                "entities":{"mol":{"format":"smiles","value":"CCO"}},"answer":"True",
                "answer_type":{"kind":"classification","labels":["True","False"]}}"#,
        )
        .unwrap()
    }

    #[test]
    fn json_shape() {
        let r = record();
        assert_eq!(r.entities["mol"].tagged(), "<smiles>CCO</smiles>");
        r.validate().unwrap();
        let back: TaskRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        let g: AnswerType = serde_json::from_str(r#"{"kind":"generation"}"#).unwrap();
        assert_eq!(g, AnswerType::Generation { ground_truth: None });
    }

    #[test]
    fn validation_errors() {
        let mut r = record();
        r.prompt_templates.push("no placeholder".into());
        assert!(matches!(r.validate(), Err(TaskError::MissingPlaceholder { template: 1, .. })));
        let mut r = record();
        r.answer = "Maybe".into();
        assert!(matches!(r.validate(), Err(TaskError::UnknownLabel { .. })));
        let mut r = record();
        r.answer = "1.5".into();
        r.answer_type = AnswerType::Regression { range: (2.0, 2.0) };
        assert!(matches!(r.validate(), Err(TaskError::DegenerateRange { .. })));
    }
}
