//! Suite runner: asks every example of every task, aggregates, scores.
//!
//! A suite is a TOML file:
//!
//! ```toml
//! name = "demo"
//! [plan]                      # default PromptPlan for every task
//! repetitions = 3
//! [[tasks]]
//! task_id = "bbbp"
//! examples = "bbbp_test.jsonl"  # TaskRecord lines, relative to the suite file
//! shots = "bbbp_train.jsonl"    # optional few-shot pool
//! metrics = ["accuracy", "auroc", "validity"]
//! ```
//!
//! Every repetition draws from its own stream, seeded from the run seed,
//! task, example and repetition, so results do not depend on how requests
//! are scheduled.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{self, HeavyAtoms, MetricError, MolecularWeight, Objective, PropertyOracle};
use super::provider::{CompletionProvider, CompletionRequest, ProviderError};
use super::{aggregate, assemble_prompt, class_probs_from_logprobs, parse_completion, EvalError, FirstToken, Prompt, PromptPlan, Rule, Value};
use crate::chem::parse_smiles;
use crate::task::{AnswerType, Format, TaskRecord};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("suite config: {0}")]
    Config(String),
    #[error("{}:{line}: {message}", path.display())]
    Schema { path: PathBuf, line: usize, message: String },
    #[error("task {task}: metric {metric} does not apply to {kind} tasks")]
    MetricNotApplicable { task: String, metric: String, kind: &'static str },
    #[error("task {task}: no examples")]
    NoExamples { task: String },
    #[error("task {task}: records of different answer kinds")]
    MixedKinds { task: String },
    #[error("example {id}: {source}")]
    Eval { id: String, source: EvalError },
    #[error("example {id}: {source}")]
    Provider { id: String, source: ProviderError },
    #[error("writing output: {0}")]
    Output(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Mae,
    Rmse,
    Spearman,
    Auroc,
    Auprc,
    Validity,
    Similarity,
    SuccessRate,
    RelativeImprovement,
    Uniqueness,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::Accuracy,
        Metric::Mae,
        Metric::Rmse,
        Metric::Spearman,
        Metric::Auroc,
        Metric::Auprc,
        Metric::Validity,
        Metric::Similarity,
        Metric::SuccessRate,
        Metric::RelativeImprovement,
        Metric::Uniqueness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Mae => "mae",
            Metric::Rmse => "rmse",
            Metric::Spearman => "spearman",
            Metric::Auroc => "auroc",
            Metric::Auprc => "auprc",
            Metric::Validity => "validity",
            Metric::Similarity => "similarity",
            Metric::SuccessRate => "success_rate",
            Metric::RelativeImprovement => "relative_improvement",
            Metric::Uniqueness => "uniqueness",
        }
    }

    fn applies_to(self, kind: &str) -> bool {
        match self {
            Metric::Validity => true,
            Metric::Accuracy => kind != "regression",
            Metric::Mae | Metric::Rmse | Metric::Spearman => kind == "regression",
            Metric::Auroc | Metric::Auprc => kind == "classification",
            Metric::Similarity | Metric::SuccessRate | Metric::RelativeImprovement | Metric::Uniqueness => {
                kind == "generation"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub property: String,
    #[serde(default = "yes")]
    pub maximize: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task_id: String,
    pub examples: PathBuf,
    #[serde(default)]
    pub shots: Option<PathBuf>,
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub plan: Option<PromptPlan>,
    /// Label scored as positive by AUROC/AUPRC; defaults to the first label.
    #[serde(default)]
    pub positive_label: Option<String>,
    /// Entity compared against generated molecules; defaults to the first
    /// SMILES entity.
    #[serde(default)]
    pub input_entity: Option<String>,
    #[serde(default)]
    pub objectives: Vec<ObjectiveConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    #[serde(default)]
    pub plan: PromptPlan,
    pub tasks: Vec<TaskConfig>,
}

#[derive(Debug, Clone)]
pub struct SuiteTask {
    pub config: TaskConfig,
    pub plan: PromptPlan,
    pub records: Vec<TaskRecord>,
    pub shots: Vec<TaskRecord>,
}

impl SuiteTask {
    pub fn kind(&self) -> &'static str {
        self.records[0].answer_type.kind()
    }
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub tasks: Vec<SuiteTask>,
}

fn parse_records(path: &Path, text: &str) -> Result<Vec<TaskRecord>, SuiteError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let schema = |message: String| SuiteError::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: TaskRecord = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        rec.validate().map_err(|e| schema(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

impl Suite {
    /// Reads a suite file and the example files it names.
    pub fn load(path: impl AsRef<Path>) -> Result<Suite, SuiteError> {
        let path = path.as_ref();
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| SuiteError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let config: SuiteConfig = toml::from_str(&read(path)?).map_err(|e| SuiteError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Suite::resolve(config, |p| read(&base.join(p)))
    }

    /// Builds a suite, fetching example files through `read`.
    pub fn resolve(
        config: SuiteConfig,
        read: impl Fn(&Path) -> Result<String, SuiteError>,
    ) -> Result<Suite, SuiteError> {
        let mut tasks = Vec::new();
        for tc in config.tasks {
            let records = parse_records(&tc.examples, &read(&tc.examples)?)?;
            let shots = match &tc.shots {
                Some(p) => parse_records(p, &read(p)?)?,
                None => Vec::new(),
            };
            let Some(first) = records.first() else {
                return Err(SuiteError::NoExamples { task: tc.task_id });
            };
            let kind = first.answer_type.kind();
            if records.iter().any(|r| r.answer_type.kind() != kind) {
                return Err(SuiteError::MixedKinds { task: tc.task_id });
            }
            if let Some(m) = tc.metrics.iter().find(|m| !m.applies_to(kind)) {
                return Err(SuiteError::MetricNotApplicable {
                    task: tc.task_id,
                    metric: m.name().into(),
                    kind,
                });
            }
            let plan = tc.plan.clone().unwrap_or_else(|| config.plan.clone());
            tasks.push(SuiteTask {
                config: tc,
                plan,
                records,
                shots,
            });
        }
        Ok(Suite {
            name: config.name,
            tasks,
        })
    }
}

/// What one example came to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub id: String,
    pub task_id: String,
    pub truth: String,
    pub value: Value,
    pub rule: String,
    pub predictions: Vec<super::Prediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_probabilities: Option<BTreeMap<String, f64>>,
}

impl ExampleResult {
    pub fn n_valid(&self) -> usize {
        self.predictions.iter().filter(|p| p.value.is_valid()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub kind: String,
    pub examples: usize,
    pub predictions: usize,
    pub metrics: BTreeMap<String, f64>,
    /// Metrics that could not be computed, with the reason.
    pub metric_errors: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub results: Vec<ExampleResult>,
    pub summary: Vec<TaskSummary>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one repetition's stream.
pub fn repetition_seed(seed: u64, task: usize, example: usize, repetition: usize) -> u64 {
    [task, example, repetition]
        .into_iter()
        .fold(mix(seed), |acc, x| mix(acc ^ x as u64))
}

pub struct Runner<'a> {
    pub provider: &'a dyn CompletionProvider,
    pub tokens: &'a dyn FirstToken,
    pub oracles: BTreeMap<String, Box<dyn PropertyOracle + Send + Sync>>,
}

impl<'a> Runner<'a> {
    /// A runner with the built-in stand-in property oracles.
    pub fn new(provider: &'a dyn CompletionProvider, tokens: &'a dyn FirstToken) -> Self {
        let mut oracles: BTreeMap<String, Box<dyn PropertyOracle + Send + Sync>> = BTreeMap::new();
        oracles.insert("molecular_weight".into(), Box::new(MolecularWeight));
        oracles.insert("heavy_atoms".into(), Box::new(HeavyAtoms));
        Runner {
            provider,
            tokens,
            oracles,
        }
    }

    pub fn run(&self, suite: &Suite, seed: u64) -> Result<SuiteReport, SuiteError> {
        let mut results = Vec::new();
        let mut summary = Vec::new();
        for (ti, task) in suite.tasks.iter().enumerate() {
            let mut task_results = Vec::with_capacity(task.records.len());
            for (ei, rec) in task.records.iter().enumerate() {
                task_results.push(self.run_example(task, ti, ei, rec, seed)?);
            }
            summary.push(self.summarize(task, &task_results)?);
            results.extend(task_results);
        }
        Ok(SuiteReport {
            suite: suite.name.clone(),
            results,
            summary,
        })
    }

    fn run_example(
        &self,
        task: &SuiteTask,
        ti: usize,
        ei: usize,
        rec: &TaskRecord,
        seed: u64,
    ) -> Result<ExampleResult, SuiteError> {
        let id = format!("{}#{ei}", task.config.task_id);
        let eval_err = |source| SuiteError::Eval { id: id.clone(), source };
        let plan = &task.plan;
        let labels = match &rec.answer_type {
            AnswerType::Classification { labels } => Some(labels),
            _ => None,
        };

        let mut requests: Vec<(Prompt, CompletionRequest)> = Vec::with_capacity(plan.repetitions);
        for r in 0..plan.repetitions {
            let rep_seed = repetition_seed(seed, ti, ei, r);
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let prompt = assemble_prompt(rec, plan, &task.shots, &mut rng).map_err(eval_err)?;
            let req = CompletionRequest {
                prompt: prompt.text.clone(),
                temperature: plan.temperature,
                max_tokens: plan.max_tokens,
                logprobs: labels.is_some(),
                seed: rep_seed,
                example_id: id.clone(),
                repetition: r,
            };
            requests.push((prompt, req));
        }

        // Bounded in-flight requests; output order follows repetition order.
        let provider = self.provider;
        let mut responses = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(self.provider.max_in_flight().max(1)) {
            let got: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|(_, req)| s.spawn(move || provider.complete(req)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("provider thread panicked")).collect()
            });
            for r in got {
                responses.push(r.map_err(|source| SuiteError::Provider { id: id.clone(), source })?);
            }
        }

        let mut preds = Vec::with_capacity(responses.len());
        for ((prompt, req), resp) in requests.iter().zip(&responses) {
            let mut p = parse_completion(&resp.text, &rec.answer_type);
            p.template = Some(prompt.template);
            p.seed = Some(req.seed);
            if let (Some(labels), Some(lp)) = (labels, &resp.first_token_logprobs) {
                match class_probs_from_logprobs(lp, labels, self.tokens) {
                    Ok(probs) => p.class_probabilities = Some(probs),
                    Err(EvalError::NoLabelLogprobs) => {}
                    Err(e) => return Err(eval_err(e)),
                }
            }
            preds.push(p);
        }

        let rule = Rule::for_answer(&rec.answer_type);
        Ok(match aggregate(preds.clone(), &rule) {
            Ok(agg) => ExampleResult {
                id,
                task_id: task.config.task_id.clone(),
                truth: rec.answer.clone(),
                value: agg.value,
                rule: agg.rule,
                predictions: agg.predictions,
                class_probabilities: agg.class_probabilities,
            },
            Err(EvalError::AllInvalid) => ExampleResult {
                id,
                task_id: task.config.task_id.clone(),
                truth: rec.answer.clone(),
                value: Value::Invalid("every repetition invalid".into()),
                rule: rule.name().into(),
                predictions: preds,
                class_probabilities: None,
            },
            Err(e) => return Err(eval_err(e)),
        })
    }

    fn summarize(&self, task: &SuiteTask, results: &[ExampleResult]) -> Result<TaskSummary, SuiteError> {
        let mut s = TaskSummary {
            task_id: task.config.task_id.clone(),
            kind: task.kind().into(),
            examples: results.len(),
            predictions: results.iter().map(|r| r.predictions.len()).sum(),
            metrics: BTreeMap::new(),
            metric_errors: BTreeMap::new(),
        };
        for &m in &task.config.metrics {
            match self.metric(m, task, results) {
                Ok(v) => {
                    s.metrics.insert(m.name().into(), v);
                }
                Err(e) => {
                    s.metric_errors.insert(m.name().into(), e.to_string());
                }
            }
        }
        Ok(s)
    }

    fn metric(&self, m: Metric, task: &SuiteTask, results: &[ExampleResult]) -> Result<f64, MetricError> {
        let recs = &task.records;
        match m {
            Metric::Validity => {
                let valid: Vec<bool> = results
                    .iter()
                    .flat_map(|r| r.predictions.iter().map(|p| p.value.is_valid()))
                    .collect();
                metrics::validity_fraction(&valid)
            }
            Metric::Accuracy => {
                let hits: Vec<bool> = results.iter().zip(recs).map(|(r, rec)| is_correct(&r.value, rec)).collect();
                metrics::accuracy(&hits, &vec![true; hits.len()])
            }
            Metric::Mae | Metric::Rmse | Metric::Spearman => {
                let (mut p, mut t) = (Vec::new(), Vec::new());
                for (r, rec) in results.iter().zip(recs) {
                    if let (Some(v), Ok(g)) = (r.value.as_number(), rec.answer.trim().parse::<f64>()) {
                        p.push(v);
                        t.push(g);
                    }
                }
                match m {
                    Metric::Mae => metrics::mae(&p, &t),
                    Metric::Rmse => metrics::rmse(&p, &t),
                    _ => metrics::spearman(&p, &t),
                }
            }
            Metric::Auroc | Metric::Auprc => {
                let (mut labels, mut scores) = (Vec::new(), Vec::new());
                for (r, rec) in results.iter().zip(recs) {
                    let AnswerType::Classification { labels: names } = &rec.answer_type else {
                        continue;
                    };
                    let positive = task.config.positive_label.as_ref().unwrap_or(&names[0]);
                    if let Some(p) = r.class_probabilities.as_ref().and_then(|c| c.get(positive)) {
                        labels.push(rec.answer.trim() == positive);
                        scores.push(*p);
                    }
                }
                if m == Metric::Auroc {
                    metrics::auroc(&labels, &scores)
                } else {
                    metrics::auprc(&labels, &scores)
                }
            }
            Metric::Uniqueness => {
                let sets: Vec<Vec<String>> = results
                    .iter()
                    .map(|r| match &r.value {
                        Value::Molecule(s) => s.split('.').map(String::from).collect(),
                        _ => Vec::new(),
                    })
                    .collect();
                metrics::uniqueness(&sets)
            }
            Metric::Similarity | Metric::SuccessRate | Metric::RelativeImprovement => {
                let mut inputs = Vec::new();
                let mut outputs = Vec::new();
                for (r, rec) in results.iter().zip(recs) {
                    let entity = match &task.config.input_entity {
                        Some(name) => rec.entities.get(name),
                        None => rec.entities.values().find(|e| e.format == Format::Smiles),
                    };
                    let Some(e) = entity.filter(|e| e.format == Format::Smiles) else {
                        continue;
                    };
                    inputs.push(e.value.clone());
                    outputs.push(r.value.as_text().map(String::from));
                }
                if m == Metric::Similarity {
                    return metrics::tanimoto_sim_mean(&inputs, &outputs);
                }
                let mut objectives = Vec::new();
                for o in &task.config.objectives {
                    let oracle = self
                        .oracles
                        .get(&o.property)
                        .ok_or(MetricError::DegenerateInput("unknown property oracle"))?;
                    objectives.push(Objective {
                        oracle: oracle.as_ref(),
                        maximize: o.maximize,
                    });
                }
                if objectives.is_empty() {
                    return Err(MetricError::DegenerateInput("no objectives configured"));
                }
                if m == Metric::SuccessRate {
                    metrics::success_rate(&inputs, &outputs, &objectives)
                } else {
                    metrics::relative_improvement(&inputs, &outputs, &objectives)
                }
            }
        }
    }
}

/// Whether an aggregated value answers `rec`. Molecules match the
/// ground-truth set, or the canonical answer when there is none.
pub fn is_correct(value: &Value, rec: &TaskRecord) -> bool {
    match value {
        Value::Label(l) => l == rec.answer.trim(),
        Value::Molecule(m) => match rec.canonical_ground_truth() {
            Some(set) => set.contains(m),
            None => parse_smiles(rec.answer.trim()).is_ok_and(|a| a.to_canonical_smiles() == *m),
        },
        Value::Number(v) => rec.answer.trim().parse::<f64>().is_ok_and(|g| g == *v),
        Value::Invalid(_) => false,
    }
}

/// One JSON object per example, in suite order.
pub fn write_results_jsonl(report: &SuiteReport, mut out: impl Write) -> Result<(), SuiteError> {
    for r in &report.results {
        let line = serde_json::to_string(r).map_err(|e| SuiteError::Output(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| SuiteError::Output(e.to_string()))?;
    }
    Ok(())
}

/// Metric columns in the summary, in order.
pub fn summary_columns(report: &SuiteReport) -> Vec<Metric> {
    let used: BTreeSet<&str> = report.summary.iter().flat_map(|s| s.metrics.keys().map(String::as_str)).collect();
    Metric::ALL.into_iter().filter(|m| used.contains(m.name())).collect()
}

/// One row per task; metrics with six decimals, blank where not computed.
pub fn write_summary_csv(report: &SuiteReport, out: impl Write) -> Result<(), SuiteError> {
    let err = |e: csv::Error| SuiteError::Output(e.to_string());
    let columns = summary_columns(report);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["suite", "task", "kind", "examples", "predictions"];
    header.extend(columns.iter().map(|m| m.name()));
    w.write_record(&header).map_err(err)?;
    for s in &report.summary {
        let mut row = vec![
            report.suite.clone(),
            s.task_id.clone(),
            s.kind.clone(),
            s.examples.to_string(),
            s.predictions.to_string(),
        ];
        row.extend(columns.iter().map(|m| s.metrics.get(m.name()).map_or(String::new(), |v| format!("{v:.6}"))));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| SuiteError::Output(e.to_string()))?;
    Ok(())
}
