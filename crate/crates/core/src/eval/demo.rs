//! A built-in 50-example suite with scripted mock responses, for trying
//! the evaluation pipeline without a model.

use std::path::Path;

use super::harness::{Suite, SuiteConfig, SuiteError};
use super::provider::{MockProvider, ProviderError};

const SUITE: &str = include_str!("../../data/demo/suite.toml");
const CLASSIFICATION: &str = include_str!("../../data/demo/classification.jsonl");
const REGRESSION: &str = include_str!("../../data/demo/regression.jsonl");
const GENERATION: &str = include_str!("../../data/demo/generation.jsonl");
const MOCK: &str = include_str!("../../data/demo/mock.jsonl");

pub fn suite() -> Result<Suite, SuiteError> {
    let config: SuiteConfig = toml::from_str(SUITE).map_err(|e| SuiteError::Config(e.to_string()))?;
    Suite::resolve(config, |p: &Path| match p.to_str() {
        Some("classification.jsonl") => Ok(CLASSIFICATION.to_string()),
        Some("regression.jsonl") => Ok(REGRESSION.to_string()),
        Some("generation.jsonl") => Ok(GENERATION.to_string()),
        _ => Err(SuiteError::Config(format!("demo suite has no file {}", p.display()))),
    })
}

/// Scripted responses for every demo example.
pub fn mock() -> Result<MockProvider, ProviderError> {
    MockProvider::from_jsonl(MOCK)
}
