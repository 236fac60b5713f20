//! Minimal JSON-over-HTTP POST used by the remote clients.

use std::time::Duration;

use serde_json::Value;

use crate::retry::Retryable;

const BODY_EXCERPT: usize = 300;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HttpFailure {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid JSON response: {0}")]
    Decode(String),
}

impl Retryable for HttpFailure {
    fn is_retryable(&self) -> bool {
        match self {
            HttpFailure::Transport(_) => true,
            HttpFailure::Status { status, .. } => *status >= 500,
            HttpFailure::Decode(_) => false,
        }
    }
}

pub(crate) fn excerpt(s: &str) -> String {
    match s.char_indices().nth(BODY_EXCERPT) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    endpoint: String,
    auth: Option<String>,
}

impl JsonClient {
    pub fn new(endpoint: &str, auth: Option<String>, timeout: Duration) -> Self {
        JsonClient {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            endpoint: endpoint.to_string(),
            auth,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// One POST attempt. The bearer token is never logged.
    pub fn post(&self, body: &Value) -> Result<Value, HttpFailure> {
        log::debug!("POST {} {}", self.endpoint, excerpt(&body.to_string()));
        let mut req = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Some(token) = &self.auth {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = match req.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(status, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                return Err(HttpFailure::Status {
                    status,
                    body: excerpt(&body),
                });
            }
            Err(ureq::Error::Transport(t)) => return Err(HttpFailure::Transport(t.to_string())),
        };
        let text = resp.into_string().map_err(|e| HttpFailure::Transport(e.to_string()))?;
        log::debug!("response {}", excerpt(&text));
        serde_json::from_str(&text).map_err(|e| HttpFailure::Decode(format!("{e}: {}", excerpt(&text))))
    }
}

/// Reads a secret from the named environment variable, if configured.
pub fn secret_from_env(var: Option<&str>) -> Option<String> {
    var.and_then(|v| std::env::var(v).ok()).filter(|s| !s.is_empty())
}
