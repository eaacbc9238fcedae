//! Pluggable chat-completion gateway used by every synthesis and
//! verification call: prompt templating, bounded concurrency, retries with
//! exponential backoff, transcript logging, and interchangeable backends
//! (deterministic mock, OpenAI-compatible HTTP, transcript replay).

mod http;
mod mock;
mod replay;
mod templates;

pub use http::HttpBackend;
pub use mock::MockBackend;
pub use replay::ReplayBackend;
pub use templates::builtin_templates;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default sampling temperature for synthesis prompts.
pub const SYNTHESIS_TEMPERATURE: f64 = 0.7;
/// The consistency judgment always runs deterministically.
pub const CONSISTENCY_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    SemanticExtract,
    SemanticRespond,
    BackInstruct,
    Scale,
    Paraphrase,
    Consistency,
}

impl TemplateId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateId::SemanticExtract => "semantic_extract",
            TemplateId::SemanticRespond => "semantic_respond",
            TemplateId::BackInstruct => "back_instruct",
            TemplateId::Scale => "scale",
            TemplateId::Paraphrase => "paraphrase",
            TemplateId::Consistency => "consistency",
        }
    }

    pub fn all() -> [TemplateId; 6] {
        [
            TemplateId::SemanticExtract,
            TemplateId::SemanticRespond,
            TemplateId::BackInstruct,
            TemplateId::Scale,
            TemplateId::Paraphrase,
            TemplateId::Consistency,
        ]
    }
}

/// A versioned prompt template with named `{placeholder}` slots.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: &'static str,
    pub version: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone)]
pub struct LlmRequest {
    pub template_id: TemplateId,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone)]
pub struct LlmResponse {
    pub text: String,
    pub latency: Duration,
    pub backend: String,
    pub retries: u32,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("template `{0}` is not registered")]
    UnknownTemplate(String),
    #[error("unbound placeholder `{placeholder}` in template {template}")]
    MissingPlaceholder {
        template: &'static str,
        placeholder: String,
    },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("transcript io: {0}")]
    Transcript(#[from] std::io::Error),
}

/// Backend failures split into retryable and fail-fast classes.
#[derive(Debug)]
pub enum BackendError {
    Transient(String),
    Fatal(String),
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn send(&self, request: &LlmRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32 << attempt.min(8);
        (self.base_delay * factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub retry: RetryPolicy,
    /// Maximum concurrently in-flight requests.
    pub max_in_flight: usize,
    /// Optional request rate limit (requests per second).
    pub rate_per_sec: Option<f64>,
    /// Overrides the synthesis-template temperature when set.
    pub synthesis_temperature: Option<f64>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            rate_per_sec: None,
            synthesis_temperature: None,
        }
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
    }

    fn release(&self) {
        *self.permits.lock().unwrap() += 1;
        self.cv.notify_one();
    }
}

struct TokenBucket {
    state: Mutex<(f64, Instant)>,
    rate: f64,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        Self {
            state: Mutex::new((1.0, Instant::now())),
            rate,
        }
    }

    fn take(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().unwrap();
                let now = Instant::now();
                let elapsed = now.duration_since(s.1).as_secs_f64();
                s.0 = (s.0 + elapsed * self.rate).min(self.rate.max(1.0));
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - s.0) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub template_id: String,
    pub request: String,
    pub response: String,
    pub timestamp: u64,
}

/// The gateway: renders templates, issues completions through the configured
/// backend under the in-flight bound, retries transient failures, and logs
/// every exchange when a transcript path is set.
pub struct LlmGateway {
    templates: BTreeMap<TemplateId, PromptTemplate>,
    backend: Box<dyn Backend>,
    config: GatewayConfig,
    semaphore: Semaphore,
    bucket: Option<TokenBucket>,
    transcript: Option<Mutex<std::fs::File>>,
}

impl LlmGateway {
    pub fn new(backend: Box<dyn Backend>, config: GatewayConfig) -> Self {
        let mut templates = BTreeMap::new();
        for t in builtin_templates() {
            templates.insert(t.id, t);
        }
        let semaphore = Semaphore::new(config.max_in_flight);
        let bucket = config.rate_per_sec.map(TokenBucket::new);
        Self {
            templates,
            backend,
            config,
            semaphore,
            bucket,
            transcript: None,
        }
    }

    /// A gateway over the deterministic mock backend with default config.
    pub fn mock() -> Self {
        Self::new(Box::new(MockBackend::new()), GatewayConfig::default())
    }

    pub fn with_transcript(mut self, path: &Path) -> Result<Self, GatewayError> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        self.transcript = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Template introspection (temperatures, versions).
    pub fn template(&self, id: TemplateId) -> Option<&PromptTemplate> {
        self.templates.get(&id)
    }

    /// The temperature a request rendered from `id` will carry.
    pub fn effective_temperature(&self, id: TemplateId) -> Option<f64> {
        let t = self.templates.get(&id)?;
        if id == TemplateId::Consistency {
            return Some(t.temperature);
        }
        Some(self.config.synthesis_temperature.unwrap_or(t.temperature))
    }

    /// Renders a template with the given placeholder bindings. Deterministic
    /// string substitution; an unbound placeholder is an error naming it.
    pub fn render(
        &self,
        id: TemplateId,
        bindings: &[(&str, &str)],
    ) -> Result<LlmRequest, GatewayError> {
        let template = self
            .templates
            .get(&id)
            .ok_or_else(|| GatewayError::UnknownTemplate(id.as_str().to_string()))?;
        let prompt = substitute(template.body, bindings).map_err(|placeholder| {
            GatewayError::MissingPlaceholder {
                template: id.as_str(),
                placeholder,
            }
        })?;
        Ok(LlmRequest {
            template_id: id,
            prompt,
            temperature: self
                .effective_temperature(id)
                .unwrap_or(SYNTHESIS_TEMPERATURE),
            max_tokens: template.max_tokens,
        })
    }

    /// Issues the request, retrying transient failures with exponential
    /// backoff up to the configured attempt budget.
    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        self.semaphore.acquire();
        let result = self.complete_inner(request);
        self.semaphore.release();
        result
    }

    fn complete_inner(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        let start = Instant::now();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            if let Some(bucket) = &self.bucket {
                bucket.take();
            }
            match self.backend.send(request) {
                Ok(text) => {
                    self.log(request, &text)?;
                    return Ok(LlmResponse {
                        text,
                        latency: start.elapsed(),
                        backend: self.backend.name().to_string(),
                        retries: attempt - 1,
                    });
                }
                Err(BackendError::Transient(message)) => {
                    if attempt >= self.config.retry.max_attempts {
                        return Err(GatewayError::Transport {
                            attempts: attempt,
                            message,
                        });
                    }
                    std::thread::sleep(self.config.retry.delay(attempt - 1));
                }
                Err(BackendError::Fatal(message)) => {
                    return Err(GatewayError::Config(message));
                }
            }
        }
    }

    fn log(&self, request: &LlmRequest, response: &str) -> Result<(), GatewayError> {
        let Some(file) = &self.transcript else {
            return Ok(());
        };
        let entry = TranscriptEntry {
            template_id: request.template_id.as_str().to_string(),
            request: request.prompt.clone(),
            response: response.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut f = file.lock().unwrap();
        serde_json::to_writer(&mut *f, &entry).map_err(|e| GatewayError::Config(e.to_string()))?;
        writeln!(f)?;
        Ok(())
    }
}

/// Replaces `{name}` placeholders in `body`. Returns the first unbound
/// placeholder name on failure. Values are not rescanned.
fn substitute(body: &str, bindings: &[(&str, &str)]) -> Result<String, String> {
    let mut out = String::with_capacity(body.len());
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(close) = body[i + 1..].find('}') {
                let name = &body[i + 1..i + 1 + close];
                let valid = !name.is_empty()
                    && name
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
                if valid {
                    match bindings.iter().find(|(k, _)| *k == name) {
                        Some((_, v)) => {
                            out.push_str(v);
                            i += close + 2;
                            continue;
                        }
                        None => return Err(name.to_string()),
                    }
                }
            }
        }
        let c = body[i..].chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    Ok(out)
}
