//! Benchmark evaluation: prompt assembly, completion parsing, first-token
//! class probabilities, per-example aggregation, metrics and a suite runner.
//!
//! Each test example is asked several times. Every repetition draws a
//! template and an input augmentation, the model answers inside an answer
//! block, and the per-repetition predictions are folded into one value:
//! median for numbers, majority vote for labels and molecules.

pub mod demo;
pub mod harness;
pub mod metrics;
pub mod provider;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::parse_smiles;
use crate::rewards::Completion;
use crate::task::{AnswerType, TaskRecord};
use crate::tokenizer::{augment_record, tokenize, AugmentError, AugmentationPolicy, Vocabulary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("task {task_id}: template {template} lacks placeholder {{{name}}}")]
    MissingPlaceholder { task_id: String, template: usize, name: String },
    #[error("task {0}: no prompt templates")]
    NoTemplates(String),
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("labels {first:?} and {second:?} share the first token {token:?}")]
    AmbiguousLabelTokens { first: String, second: String, token: String },
    #[error("no logprob for any label token")]
    NoLabelLogprobs,
    #[error("no predictions to aggregate")]
    Empty,
    #[error("every prediction is invalid")]
    AllInvalid,
    #[error("{rule} aggregation cannot combine {kind} predictions")]
    KindMismatch { rule: &'static str, kind: &'static str },
}

/// How one example is asked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptPlan {
    pub repetitions: usize,
    /// Overrides the record's own templates when set.
    pub template_pool: Option<Vec<String>>,
    pub augmentation: AugmentationPolicy,
    /// Solved training examples prepended to the prompt, for base models.
    pub few_shot: usize,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for PromptPlan {
    fn default() -> Self {
        PromptPlan {
            repetitions: 1,
            template_pool: None,
            augmentation: AugmentationPolicy::default(),
            few_shot: 0,
            temperature: 1.0,
            max_tokens: 4096,
        }
    }
}

impl PromptPlan {
    pub fn templates<'a>(&'a self, rec: &'a TaskRecord) -> &'a [String] {
        self.template_pool.as_deref().unwrap_or(&rec.prompt_templates)
    }

    /// Checks repetitions and that every template names every entity.
    pub fn validate(&self, rec: &TaskRecord) -> Result<(), EvalError> {
        if self.repetitions == 0 {
            return Err(EvalError::NoRepetitions);
        }
        let templates = self.templates(rec);
        if templates.is_empty() {
            return Err(EvalError::NoTemplates(rec.task_id.clone()));
        }
        for (i, t) in templates.iter().enumerate() {
            if let Some(name) = rec.entities.keys().find(|name| !t.contains(&format!("{{{name}}}"))) {
                return Err(EvalError::MissingPlaceholder {
                    task_id: rec.task_id.clone(),
                    template: i,
                    name: name.clone(),
                });
            }
        }
        self.augmentation.validate()?;
        Ok(())
    }
}

/// An assembled prompt and the template it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub template: usize,
}

fn render(template: &str, rec: &TaskRecord) -> String {
    rec.entities
        .iter()
        .fold(template.to_string(), |t, (name, e)| t.replace(&format!("{{{name}}}"), &e.tagged()))
}

/// Draws a template, augments the entities and substitutes them. With
/// `plan.few_shot > 0`, that many records from `shots` (fewer if there are
/// not enough) are rendered with their answers and prepended.
pub fn assemble_prompt<R: Rng + ?Sized>(
    rec: &TaskRecord,
    plan: &PromptPlan,
    shots: &[TaskRecord],
    rng: &mut R,
) -> Result<Prompt, EvalError> {
    plan.validate(rec)?;
    let templates = plan.templates(rec);
    let template = rng.gen_range(0..templates.len());
    let augmented = augment_record(rec, &plan.augmentation, rng)?;
    let question = render(&templates[template], &augmented);

    let k = plan.few_shot.min(shots.len());
    let mut parts = Vec::with_capacity(k + 1);
    for i in sample(rng, shots.len(), k) {
        let shot = &shots[i];
        let t = &shot.prompt_templates[rng.gen_range(0..shot.prompt_templates.len())];
        parts.push(format!("{}\n<answer>{}</answer>", render(t, shot), shot.answer));
    }
    parts.push(question);
    Ok(Prompt {
        text: parts.join("\n\n"),
        template,
    })
}

/// The parsed content of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Value {
    Number(f64),
    Label(String),
    /// Canonical SMILES.
    Molecule(String),
    /// Why the answer could not be used.
    Invalid(String),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Label(_) => "label",
            Value::Molecule(_) => "molecule",
            Value::Invalid(_) => "invalid",
        }
    }

    pub fn is_valid(&self) -> bool {
        !matches!(self, Value::Invalid(_))
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Label(s) | Value::Molecule(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_probabilities: Option<BTreeMap<String, f64>>,
}

impl Prediction {
    pub fn new(value: Value) -> Self {
        Prediction {
            value,
            template: None,
            seed: None,
            class_probabilities: None,
        }
    }
}

/// Reads the answer block and interprets it for the answer type. Never
/// fails: unusable answers become [`Value::Invalid`].
pub fn parse_completion(raw: &str, answer_type: &AnswerType) -> Prediction {
    let c = Completion::parse(raw);
    if c.answer_span.is_none() {
        return Prediction::new(Value::Invalid("no answer block".into()));
    }
    let a = c.answer();
    let value = match answer_type {
        AnswerType::Regression { .. } => match a.parse::<f64>() {
            Ok(v) if v.is_finite() => Value::Number(v),
            _ => Value::Invalid(format!("not a number: {a:?}")),
        },
        AnswerType::Classification { labels } => match labels.iter().find(|l| l.as_str() == a) {
            Some(l) => Value::Label(l.clone()),
            None => Value::Invalid(format!("not a label: {a:?}")),
        },
        AnswerType::Generation { .. } => match parse_smiles(a) {
            Ok(m) if !m.is_empty() => Value::Molecule(m.to_canonical_smiles()),
            Ok(_) => Value::Invalid("empty molecule".into()),
            Err(e) => Value::Invalid(e.to_string()),
        },
    };
    Prediction::new(value)
}

/// The first token a model would emit for a label.
pub trait FirstToken {
    fn first_token(&self, label: &str) -> Option<String>;
}

impl FirstToken for Vocabulary {
    fn first_token(&self, label: &str) -> Option<String> {
        let seq = tokenize(label, self, false).ok()?;
        let id = *seq.ids.first()?;
        self.token(id).map(|t| t.surface.clone())
    }
}

/// Softmax over the first-token logprobs of the labels. Label tokens the
/// provider did not report get probability zero.
pub fn class_probs_from_logprobs(
    logprobs: &BTreeMap<String, f64>,
    labels: &[String],
    tokens: &dyn FirstToken,
) -> Result<BTreeMap<String, f64>, EvalError> {
    let mut firsts: Vec<(&String, String)> = Vec::with_capacity(labels.len());
    for label in labels {
        let tok = tokens.first_token(label).unwrap_or_default();
        if let Some((other, _)) = firsts.iter().find(|(_, t)| *t == tok) {
            return Err(EvalError::AmbiguousLabelTokens {
                first: (*other).clone(),
                second: label.clone(),
                token: tok,
            });
        }
        firsts.push((label, tok));
    }
    let lp: Vec<Option<f64>> = firsts.iter().map(|(_, t)| logprobs.get(t).copied()).collect();
    let max = lp.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(EvalError::NoLabelLogprobs);
    }
    let w: Vec<f64> = lp.iter().map(|v| v.map_or(0.0, |v| (v - max).exp())).collect();
    let z: f64 = w.iter().sum();
    Ok(firsts.iter().zip(w).map(|((l, _), w)| ((*l).clone(), w / z)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Median,
    Majority,
}

impl Rule {
    /// Median for regression, majority vote otherwise.
    pub fn for_answer(t: &AnswerType) -> Rule {
        match t {
            AnswerType::Regression { .. } => Rule::Median,
            _ => Rule::Majority,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::Median => "median",
            Rule::Majority => "majority",
        }
    }
}

/// A task-specific way of folding valid predictions into one value.
pub trait Aggregator {
    fn name(&self) -> &str;
    fn aggregate(&self, valid: &[&Value]) -> Result<Value, EvalError>;
}

impl Aggregator for Rule {
    fn name(&self) -> &str {
        Rule::name(*self)
    }

    fn aggregate(&self, valid: &[&Value]) -> Result<Value, EvalError> {
        match self {
            Rule::Median => {
                let mut xs = valid
                    .iter()
                    .map(|v| {
                        v.as_number().ok_or(EvalError::KindMismatch {
                            rule: "median",
                            kind: v.kind(),
                        })
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                xs.sort_by(f64::total_cmp);
                let n = xs.len();
                Ok(Value::Number(if n % 2 == 1 {
                    xs[n / 2]
                } else {
                    (xs[n / 2 - 1] + xs[n / 2]) / 2.0
                }))
            }
            Rule::Majority => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for v in valid {
                    let s = v.as_text().ok_or(EvalError::KindMismatch {
                        rule: "majority",
                        kind: v.kind(),
                    })?;
                    *counts.entry(s).or_default() += 1;
                }
                let kind_of = valid[0];
                // BTreeMap order makes the first maximum the smallest label.
                let (best, _) = counts
                    .iter()
                    .fold(("", 0), |acc, (&s, &n)| if n > acc.1 { (s, n) } else { acc });
                Ok(match kind_of {
                    Value::Molecule(_) => Value::Molecule(best.to_string()),
                    _ => Value::Label(best.to_string()),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalAggregate {
    pub predictions: Vec<Prediction>,
    pub value: Value,
    pub rule: String,
    /// Mean of the per-repetition class probabilities, where reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_probabilities: Option<BTreeMap<String, f64>>,
}

impl EvalAggregate {
    pub fn n_invalid(&self) -> usize {
        self.predictions.iter().filter(|p| !p.value.is_valid()).count()
    }

    pub fn validity_fraction(&self) -> f64 {
        1.0 - self.n_invalid() as f64 / self.predictions.len() as f64
    }
}

/// Folds the predictions of one example. Invalid predictions are left out
/// of the vote but kept in the list.
pub fn aggregate(preds: Vec<Prediction>, rule: &dyn Aggregator) -> Result<EvalAggregate, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let valid: Vec<&Value> = preds.iter().map(|p| &p.value).filter(|v| v.is_valid()).collect();
    if valid.is_empty() {
        return Err(EvalError::AllInvalid);
    }
    let value = rule.aggregate(&valid)?;
    Ok(EvalAggregate {
        class_probabilities: mean_probabilities(&preds),
        value,
        rule: rule.name().to_string(),
        predictions: preds,
    })
}

fn mean_probabilities(preds: &[Prediction]) -> Option<BTreeMap<String, f64>> {
    let with: Vec<&BTreeMap<String, f64>> = preds.iter().filter_map(|p| p.class_probabilities.as_ref()).collect();
    if with.is_empty() {
        return None;
    }
    let mut sum: BTreeMap<String, f64> = BTreeMap::new();
    for probs in &with {
        for (k, v) in *probs {
            *sum.entry(k.clone()).or_default() += v;
        }
    }
    let n = with.len() as f64;
    Some(sum.into_iter().map(|(k, v)| (k, v / n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nums(xs: &[f64]) -> Vec<Prediction> {
        xs.iter().map(|&x| Prediction::new(Value::Number(x))).collect()
    }

    fn labels(xs: &[&str]) -> Vec<Prediction> {
        xs.iter().map(|x| Prediction::new(Value::Label(x.to_string()))).collect()
    }

    #[test]
    fn medians_and_votes() {
        assert_eq!(aggregate(nums(&[1.0, 3.0, 2.0]), &Rule::Median).unwrap().value, Value::Number(2.0));
        assert_eq!(aggregate(nums(&[1.0, 2.0, 3.0, 4.0]), &Rule::Median).unwrap().value, Value::Number(2.5));
        assert_eq!(aggregate(labels(&["A", "A", "B"]), &Rule::Majority).unwrap().value, Value::Label("A".into()));
        assert_eq!(aggregate(labels(&["B", "A"]), &Rule::Majority).unwrap().value, Value::Label("A".into()));
        let mut p = nums(&[5.0]);
        p.push(Prediction::new(Value::Invalid("x".into())));
        let agg = aggregate(p, &Rule::Median).unwrap();
        assert_eq!((agg.value.clone(), agg.validity_fraction()), (Value::Number(5.0), 0.5));
        assert_eq!(
            aggregate(vec![Prediction::new(Value::Invalid("x".into()))], &Rule::Median),
            Err(EvalError::AllInvalid)
        );
        assert!(matches!(aggregate(labels(&["A"]), &Rule::Median), Err(EvalError::KindMismatch { .. })));
    }

    #[test]
    fn parsing() {
        let reg = AnswerType::Regression { range: (0.0, 1.0) };
        assert_eq!(parse_completion("<think>t</think><answer>0.82</answer>", &reg).value, Value::Number(0.82));
        assert!(!parse_completion("0.82", &reg).value.is_valid());
        let gen = AnswerType::Generation { ground_truth: None };
        assert_eq!(parse_completion("<answer>OC(C)=O</answer>", &gen).value, Value::Molecule("CC(=O)O".into()));
        let cls = AnswerType::Classification {
            labels: vec!["Yes".into(), "No".into()],
        };
        assert_eq!(parse_completion("<answer> No </answer>", &cls).value, Value::Label("No".into()));
        assert!(!parse_completion("<answer>Maybe</answer>", &cls).value.is_valid());
    }
}
