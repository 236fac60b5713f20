//! Translation requests against a completion service or an offline mock.
//!
//! Decoding is always greedy: requests carry `temperature = 0`, `top_p = 1`
//! and a single choice.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::http::{excerpt, HttpFailure, JsonClient};
use crate::metrics::tokenize;
use crate::pool::bounded_map;
use crate::prompting::Template;
use crate::retry::{RetryPolicy, Retryable};

pub const MIN_MAX_TOKENS: u32 = 64;
pub const MAX_TOKENS_PER_SOURCE_TOKEN: u32 = 4;

/// Generation budget for a query: four tokens per source token, at least 64.
pub fn default_max_tokens(query: &str) -> u32 {
    (tokenize(query).len() as u32 * MAX_TOKENS_PER_SOURCE_TOKEN).max(MIN_MAX_TOKENS)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("service returned HTTP {status} after {attempts} attempt(s): {body}")]
    Service { status: u16, body: String, attempts: u32 },
    #[error("malformed service response: {0}")]
    Protocol(String),
    #[error("empty completion")]
    EmptyOutput,
    #[error("mock backend has no entry for query {0:?}")]
    MockMiss(String),
    #[error("duplicate query id {0:?} in batch")]
    DuplicateQueryId(String),
    #[error("all {count} batch items failed; first error: {first}")]
    AllFailed { count: usize, first: Box<BackendError> },
}

impl BackendError {
    fn with_attempts(self, n: u32) -> Self {
        match self {
            BackendError::Transport { message, .. } => BackendError::Transport { message, attempts: n },
            BackendError::Service { status, body, .. } => BackendError::Service {
                status,
                body,
                attempts: n,
            },
            other => other,
        }
    }

    pub fn is_transport(&self) -> bool {
        match self {
            BackendError::Transport { .. } | BackendError::Service { .. } => true,
            BackendError::AllFailed { first, .. } => first.is_transport(),
            _ => false,
        }
    }
}

impl Retryable for BackendError {
    fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport { .. } => true,
            BackendError::Service { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

impl From<HttpFailure> for BackendError {
    fn from(f: HttpFailure) -> Self {
        match f {
            HttpFailure::Transport(message) => BackendError::Transport { message, attempts: 1 },
            HttpFailure::Status { status, body } => BackendError::Service {
                status,
                body,
                attempts: 1,
            },
            HttpFailure::Decode(m) => BackendError::Protocol(m),
        }
    }
}

/// One prompt to translate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub query_id: String,
    /// System message, for templates that split the instruction out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    /// User message, or the whole prompt when `system` is unset.
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<String>,
    pub max_tokens: u32,
}

impl TranslationRequest {
    /// The prompt as one text, instruction included.
    pub fn full_text(&self, separator: &str) -> String {
        match &self.system {
            Some(s) => format!("{s}{separator}{}", self.prompt),
            None => self.prompt.clone(),
        }
    }
}

/// Raw completion returned by a single backend call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub meta: String,
}

pub trait CompletionBackend: Sync {
    /// One attempt, no retries.
    fn complete(&self, request: &TranslationRequest) -> Result<Completion, BackendError>;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationResult {
    pub query_id: String,
    pub hypothesis: String,
    pub latency_ms: u64,
    pub attempts: u32,
    pub backend_meta: String,
}

/// Completion text minus any prompt echo, cut at the stop sequence, trimmed.
pub fn extract_hypothesis(completion: &str, request: &TranslationRequest) -> Result<String, BackendError> {
    let mut text = completion.strip_prefix(request.prompt.as_str()).unwrap_or(completion);
    text = text.trim_start();
    if let Some(stop) = request.stop.as_deref().filter(|s| !s.is_empty()) {
        if let Some(i) = text.find(stop) {
            text = &text[..i];
        }
    }
    let text = text.trim();
    if text.is_empty() {
        Err(BackendError::EmptyOutput)
    } else {
        Ok(text.to_string())
    }
}

/// Translates one request, retrying transient failures per `policy`.
pub fn translate(
    request: &TranslationRequest,
    backend: &dyn CompletionBackend,
    policy: &RetryPolicy,
) -> Result<TranslationResult, BackendError> {
    let start = Instant::now();
    let (out, attempts) = policy.run(|attempt| {
        log::debug!("translate {} attempt {attempt}", request.query_id);
        backend.complete(request)
    });
    let completion = out.map_err(|e| e.with_attempts(attempts))?;
    let hypothesis = extract_hypothesis(&completion.text, request)?;
    Ok(TranslationResult {
        query_id: request.query_id.clone(),
        hypothesis,
        latency_ms: start.elapsed().as_millis() as u64,
        attempts,
        backend_meta: completion.meta,
    })
}

/// Translates every request with at most `max_inflight` outstanding calls.
/// Results follow input order; failed items carry their error.
pub fn translate_batch(
    requests: &[TranslationRequest],
    backend: &dyn CompletionBackend,
    policy: &RetryPolicy,
    max_inflight: usize,
) -> Result<Vec<Result<TranslationResult, BackendError>>, BackendError> {
    let mut seen = HashSet::new();
    for r in requests {
        if !seen.insert(r.query_id.as_str()) {
            return Err(BackendError::DuplicateQueryId(r.query_id.clone()));
        }
    }
    let results = bounded_map(requests, max_inflight, |_, r| translate(r, backend, policy));
    if !results.is_empty() && results.iter().all(Result::is_err) {
        let first = results.into_iter().next().and_then(Result::err).expect("non-empty");
        return Err(BackendError::AllFailed {
            count: requests.len(),
            first: Box::new(first),
        });
    }
    Ok(results)
}

/// Remote chat-completion service.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: JsonClient,
    model: String,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, auth: Option<String>, timeout: Duration) -> Self {
        HttpBackend {
            client: JsonClient::new(endpoint, auth, timeout),
            model: model.to_string(),
        }
    }

    pub fn request_body(&self, request: &TranslationRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": request.prompt}));
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": 0,
            "top_p": 1,
            "n": 1,
            "max_tokens": request.max_tokens,
        });
        if let Some(stop) = &request.stop {
            body["stop"] = json!([stop]);
        }
        body
    }
}

fn completion_text(body: &Value) -> Option<&str> {
    let choice = body.get("choices")?.get(0)?;
    choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .or_else(|| choice.get("text").and_then(Value::as_str))
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &TranslationRequest) -> Result<Completion, BackendError> {
        let body = self.client.post(&self.request_body(request))?;
        let text = completion_text(&body)
            .ok_or_else(|| BackendError::Protocol(format!("no completion in {}", excerpt(&body.to_string()))))?;
        Ok(Completion {
            text: text.to_string(),
            meta: excerpt(&body.to_string()),
        })
    }

    fn describe(&self) -> String {
        format!("http {} model={}", self.client.endpoint(), self.model)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockMode {
    /// Query text → completion.
    Table(HashMap<String, String>),
    /// Returns the query unchanged.
    Echo,
}

/// Offline backend that reads the query back out of the rendered prompt.
#[derive(Debug, Clone)]
pub struct MockBackend {
    template: Template,
    mode: MockMode,
}

impl MockBackend {
    pub fn new(template: Template, mode: MockMode) -> Self {
        MockBackend { template, mode }
    }

    pub fn table<I, K, V>(template: Template, entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let map = entries.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        MockBackend::new(template, MockMode::Table(map))
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &TranslationRequest) -> Result<Completion, BackendError> {
        let full = request.full_text(self.template.separator());
        let query = self
            .template
            .parse_query(&full)
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        let text = match &self.mode {
            MockMode::Table(map) => map.get(&query).cloned().ok_or(BackendError::MockMiss(query))?,
            MockMode::Echo => query,
        };
        Ok(Completion {
            text,
            meta: "mock".into(),
        })
    }

    fn describe(&self) -> String {
        match self.mode {
            MockMode::Table(ref m) => format!("mock table ({} entries)", m.len()),
            MockMode::Echo => "mock echo".into(),
        }
    }
}
