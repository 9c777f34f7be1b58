use std::fmt;
use std::path::Path;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::config::{load_toml, ConfigError};

/// Consulted when the endpoint config carries no key.
pub const API_KEY_ENV: &str = "WARP_API_KEY";

const MAX_BACKOFF: Duration = Duration::from_secs(8);

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    /// Everything before `/chat/completions`, e.g. `http://127.0.0.1:8000/v1`.
    pub base_url: String,
    pub model_name: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub request_timeout_ms: u64,
    #[serde(default)]
    pub temperature: f64,
    /// Optional per-trial sampling seed, indexed by trial.
    #[serde(default)]
    pub trial_seeds: Vec<u64>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_backoff")]
    pub initial_backoff_ms: u64,
}

fn default_retries() -> u32 {
    3
}
fn default_timeout() -> u64 {
    300_000
}
fn default_in_flight() -> usize {
    4
}
fn default_backoff() -> u64 {
    250
}

impl fmt::Debug for ModelEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelEndpoint")
            .field("base_url", &self.base_url)
            .field("model_name", &self.model_name)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("max_retries", &self.max_retries)
            .field("request_timeout_ms", &self.request_timeout_ms)
            .finish_non_exhaustive()
    }
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> ModelEndpoint {
        ModelEndpoint {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key: None,
            max_retries: default_retries(),
            request_timeout_ms: default_timeout(),
            temperature: 0.0,
            trial_seeds: Vec::new(),
            max_in_flight: default_in_flight(),
            initial_backoff_ms: default_backoff(),
        }
    }

    /// Loads the TOML config and falls back to the environment for the key.
    pub fn from_toml_file(path: &Path) -> Result<ModelEndpoint, ConfigError> {
        let mut ep: ModelEndpoint = load_toml(path)?;
        if ep.api_key.is_none() {
            ep.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        }
        ep.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(ep)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.request_timeout_ms == 0 {
            return Err(EvalError::InvalidEndpoint("request_timeout_ms must be positive".into()));
        }
        if !self.base_url.starts_with("http://") && !self.base_url.starts_with("https://") {
            return Err(EvalError::InvalidEndpoint(format!("base_url {:?} is not an http URL", self.base_url)));
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub(crate) fn client(&self) -> Result<Client, EvalError> {
        Client::builder()
            .timeout(Duration::from_millis(self.request_timeout_ms))
            .build()
            .map_err(|e| EvalError::InvalidEndpoint(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn retryable(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}

fn content_of(body: &Value) -> Option<String> {
    body.pointer("/choices/0/message/content").and_then(Value::as_str).map(str::to_owned)
}

/// Sends one chat request, retrying transport failures, 429 and 5xx with
/// exponential backoff. Other 4xx statuses fail immediately.
pub fn query_endpoint(client: &Client, ep: &ModelEndpoint, req: &ChatRequest) -> Result<String, EvalError> {
    let attempts = ep.max_retries + 1;
    let mut backoff = Duration::from_millis(ep.initial_backoff_ms);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(backoff);
            backoff = (backoff * 2).min(MAX_BACKOFF);
        }
        let mut builder = client.post(ep.url()).json(req);
        if let Some(key) = &ep.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = match builder.send() {
            Ok(r) => r,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let status = resp.status();
        if retryable(status) {
            last = format!("status {status}");
            continue;
        }
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(EvalError::EndpointRejected { status: status.as_u16(), body });
        }
        match resp.json::<Value>() {
            Ok(body) => match content_of(&body) {
                Some(c) => return Ok(c),
                None => last = "response has no choices[0].message.content".into(),
            },
            Err(e) => last = e.to_string(),
        }
    }
    Err(EvalError::EndpointUnreachable { attempts, detail: last })
}
