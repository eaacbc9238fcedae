//! OpenAI-compatible chat-completion backend over HTTP.

use std::time::Duration;

use serde_json::json;

use super::{Backend, BackendError, LlmRequest};

pub struct HttpBackend {
    base_url: String,
    api_key: String,
    model: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(
        base_url: impl Into<String>,
        api_key: impl Into<String>,
        model: impl Into<String>,
    ) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            model: model.into(),
            agent,
        }
    }

    /// Reads SQLSYNTH_API_KEY, SQLSYNTH_BASE_URL, SQLSYNTH_MODEL.
    pub fn from_env() -> Result<Self, String> {
        let api_key = std::env::var("SQLSYNTH_API_KEY")
            .map_err(|_| "SQLSYNTH_API_KEY is not set".to_string())?;
        let base_url = std::env::var("SQLSYNTH_BASE_URL")
            .unwrap_or_else(|_| "https://api.openai.com/v1".to_string());
        let model =
            std::env::var("SQLSYNTH_MODEL").map_err(|_| "SQLSYNTH_MODEL is not set".to_string())?;
        Ok(Self::new(base_url, api_key, model))
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &'static str {
        "http"
    }

    fn send(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let result = self
            .agent
            .post(&url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        match result {
            Ok(resp) => {
                let value: serde_json::Value = resp
                    .into_json()
                    .map_err(|e| BackendError::Fatal(format!("bad response body: {e}")))?;
                value["choices"][0]["message"]["content"]
                    .as_str()
                    .map(|s| s.to_string())
                    .ok_or_else(|| {
                        BackendError::Fatal("response carried no message content".into())
                    })
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                let message = format!("http {code}: {text}");
                if code == 429 || code >= 500 {
                    Err(BackendError::Transient(message))
                } else {
                    Err(BackendError::Fatal(message))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(BackendError::Transient(t.to_string())),
        }
    }
}
