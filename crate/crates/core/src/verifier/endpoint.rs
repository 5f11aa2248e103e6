use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::Phase;

/// Which call a request belongs to. Scripted endpoints key their canned
/// responses on it; real endpoints ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallContext<'a> {
    pub unique_id: &'a str,
    pub phase: Phase,
    /// 1-based.
    pub run_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed endpoint response: {0}")]
    Malformed(String),
    #[error("credentials variable {0} is not set")]
    MissingCredentials(String),
}

impl EndpointError {
    /// Transport failures, rate limits and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Transport(_) => true,
            Self::Status { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            Self::Malformed(_) | Self::MissingCredentials(_) => false,
        }
    }
}

#[async_trait]
pub trait Verifier: Send + Sync {
    async fn complete(&self, ctx: CallContext<'_>, request: &ChatRequest) -> Result<ChatResponse, EndpointError>;
}

/// Tool access the external agent is configured with. Recorded for
/// provenance; the orchestrator never runs tools itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolPermissions {
    #[serde(default)]
    pub search: bool,
    #[serde(default)]
    pub code_execution: bool,
}

fn default_samples() -> u32 {
    5
}

fn default_k() -> u32 {
    4
}

fn default_timeout() -> u64 {
    600
}

/// Connection and sampling settings for a verifier agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierEndpoint {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_samples")]
    pub n_samples: u32,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default)]
    pub tools: ToolPermissions,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl VerifierEndpoint {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.to_string(),
            model: model.to_string(),
            api_key_env: None,
            temperature: None,
            max_tokens: None,
            n_samples: default_samples(),
            k: default_k(),
            tools: ToolPermissions::default(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_samples == 0 {
            return Err("n_samples must be at least 1".into());
        }
        if self.k == 0 || self.k > self.n_samples {
            return Err(format!("k = {} must lie in 1..={}", self.k, self.n_samples));
        }
        Ok(())
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpVerifier {
    client: reqwest::Client,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl HttpVerifier {
    pub fn new(endpoint: &VerifierEndpoint) -> Result<Self, EndpointError> {
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| EndpointError::MissingCredentials(var.clone()))?),
            None => None,
        };
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/chat/completions", endpoint.base_url.trim_end_matches('/')),
            model: endpoint.model.clone(),
            api_key,
        })
    }
}

#[async_trait]
impl Verifier for HttpVerifier {
    async fn complete(&self, _ctx: CallContext<'_>, request: &ChatRequest) -> Result<ChatResponse, EndpointError> {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        if let Some(t) = request.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = request.max_tokens {
            body["max_tokens"] = json!(m);
        }
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| EndpointError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().await.map_err(|e| EndpointError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(EndpointError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| EndpointError::Malformed(e.to_string()))?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| EndpointError::Malformed("missing choices[0].message.content".into()))?;
        let tokens = |key: &str| {
            value
                .pointer(&format!("/usage/{key}"))
                .and_then(Value::as_u64)
                .and_then(|v| u32::try_from(v).ok())
        };
        Ok(ChatResponse {
            content: content.to_string(),
            prompt_tokens: tokens("prompt_tokens"),
            completion_tokens: tokens("completion_tokens"),
        })
    }
}
