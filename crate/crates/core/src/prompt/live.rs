use std::time::Duration;

use serde_json::json;

use super::backend::{BackendError, CompletionBackend, CompletionRequest, CompletionResponse};

pub const API_KEY_VAR: &str = "PERSPECTRA_API_KEY";

/// Client for an OpenAI-compatible chat completions endpoint.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
}

impl HttpBackend {
    /// Build a client, reading the API key from `PERSPECTRA_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let api_key = std::env::var(API_KEY_VAR)
            .map_err(|_| BackendError::Transport(format!("{API_KEY_VAR} is not set")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
        })
    }
}

impl CompletionBackend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        });
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    BackendError::Timeout
                } else {
                    BackendError::Transport(e.to_string())
                }
            })?;
        let status = resp.status();
        let value: serde_json::Value = resp.json().map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.is_client_error() {
            return Err(BackendError::Refusal(format!("{status}: {value}")));
        }
        if !status.is_success() {
            return Err(BackendError::Transport(format!("{status}: {value}")));
        }
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::Transport("response has no message content".into()))?;
        Ok(CompletionResponse { text: text.to_string() })
    }
}
