//! Completion providers: prompt in, raw text and optional first-token
//! logprobs out.
//!
//! [`HttpProvider`] talks to OpenAI-compatible chat-completion endpoints.
//! [`MockProvider`] replays scripted responses and needs no model.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Ask for the logprobs of the first generated token.
    pub logprobs: bool,
    pub seed: u64,
    /// Which example and repetition this is; only the mock uses them.
    pub example_id: String,
    pub repetition: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_token_logprobs: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("endpoint returned {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Decode(String),
    #[error("no scripted response for {0}")]
    NoScript(String),
    #[error("mock script line {line}: {message}")]
    Script { line: usize, message: String },
}

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, ProviderError>;

    /// How many requests may be in flight at once.
    fn max_in_flight(&self) -> usize {
        1
    }
}

/// One scripted reply: bare text, or text with first-token logprobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockResponse {
    Text(String),
    Full {
        text: String,
        #[serde(default)]
        logprobs: Option<BTreeMap<String, f64>>,
    },
}

#[derive(Debug, Deserialize)]
struct ScriptLine {
    id: String,
    responses: Vec<MockResponse>,
}

/// Replays responses keyed by example id; repetition `r` gets response
/// `r mod n`. The prompt is ignored, so results do not depend on template
/// or augmentation draws.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    scripts: HashMap<String, Vec<MockResponse>>,
}

impl MockProvider {
    pub fn new(scripts: HashMap<String, Vec<MockResponse>>) -> Self {
        MockProvider { scripts }
    }

    /// Parses `{"id": ..., "responses": [...]}` lines.
    pub fn from_jsonl(text: &str) -> Result<Self, ProviderError> {
        let mut scripts = HashMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let s: ScriptLine = serde_json::from_str(line).map_err(|e| ProviderError::Script {
                line: i + 1,
                message: e.to_string(),
            })?;
            if s.responses.is_empty() {
                return Err(ProviderError::Script {
                    line: i + 1,
                    message: "no responses".into(),
                });
            }
            scripts.insert(s.id, s.responses);
        }
        Ok(MockProvider { scripts })
    }
}

impl CompletionProvider for MockProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let script = self
            .scripts
            .get(&req.example_id)
            .ok_or_else(|| ProviderError::NoScript(req.example_id.clone()))?;
        Ok(match &script[req.repetition % script.len()] {
            MockResponse::Text(text) => CompletionResponse {
                text: text.clone(),
                first_token_logprobs: None,
            },
            MockResponse::Full { text, logprobs } => CompletionResponse {
                text: text.clone(),
                first_token_logprobs: logprobs.clone().filter(|_| req.logprobs),
            },
        })
    }

    fn max_in_flight(&self) -> usize {
        4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Up to and including the version segment, e.g. `https://host/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. An
    /// empty name sends no authorization header.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub top_logprobs: u32,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 600,
            max_in_flight: 8,
            top_logprobs: 20,
        }
    }
}

pub struct HttpProvider {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    /// Reads the API key now so a missing key fails before any request.
    pub fn new(config: HttpConfig) -> Result<Self, ProviderError> {
        let api_key = if config.api_key_env.is_empty() {
            None
        } else {
            Some(std::env::var(&config.api_key_env).map_err(|_| ProviderError::MissingApiKey(config.api_key_env.clone()))?)
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpProvider { config, api_key, agent })
    }

    pub fn request_body(&self, req: &CompletionRequest) -> Json {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "seed": req.seed,
        });
        if req.logprobs {
            body["logprobs"] = json!(true);
            body["top_logprobs"] = json!(self.config.top_logprobs);
        }
        body
    }
}

/// Pulls the text and first-token top logprobs out of a chat-completion
/// response.
pub fn parse_chat_response(body: &Json) -> Result<CompletionResponse, ProviderError> {
    let choice = &body["choices"][0];
    let text = choice["message"]["content"]
        .as_str()
        .ok_or_else(|| ProviderError::Decode("missing choices[0].message.content".into()))?
        .to_string();
    let first_token_logprobs = choice["logprobs"]["content"][0]["top_logprobs"].as_array().map(|tops| {
        tops.iter()
            .filter_map(|t| Some((t["token"].as_str()?.to_string(), t["logprob"].as_f64()?)))
            .collect()
    });
    Ok(CompletionResponse {
        text,
        first_token_logprobs,
    })
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut call = self.agent.post(&url).content_type("application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = call
            .send(self.request_body(req).to_string())
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status { status, body: text });
        }
        let body: Json = serde_json::from_str(&text).map_err(|e| ProviderError::Decode(e.to_string()))?;
        parse_chat_response(&body)
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight.max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chat_response_fields() {
        let body = json!({"choices": [{"message": {"content": "<answer>Yes</answer>"},
            "logprobs": {"content": [{"token": "<", "logprob": -0.1,
                "top_logprobs": [{"token": "Yes", "logprob": -0.2}, {"token": "No", "logprob": -1.8}]}]}}]});
        let r = parse_chat_response(&body).unwrap();
        assert_eq!(r.text, "<answer>Yes</answer>");
        assert_eq!(r.first_token_logprobs.unwrap()["No"], -1.8);
        assert!(parse_chat_response(&json!({})).is_err());
    }

    #[test]
    fn mock_cycles_responses() {
        let m = MockProvider::from_jsonl(r#"{"id": "a", "responses": ["x", {"text": "y", "logprobs": {"T": -1.0}}]}"#).unwrap();
        let mut req = CompletionRequest {
            prompt: String::new(),
            temperature: 1.0,
            max_tokens: 10,
            logprobs: true,
            seed: 0,
            example_id: "a".into(),
            repetition: 3,
        };
        let r = m.complete(&req).unwrap();
        assert_eq!(r.text, "y");
        assert!(r.first_token_logprobs.is_some());
        req.example_id = "b".into();
        assert_eq!(m.complete(&req), Err(ProviderError::NoScript("b".into())));
    }
}
