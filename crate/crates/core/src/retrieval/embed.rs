use std::time::Duration;

use serde_json::{json, Value};

use super::{normalize, EmbeddingVector};
use crate::http::{excerpt, HttpFailure, JsonClient};
use crate::pool::bounded_map;
use crate::retry::{RetryPolicy, Retryable};

pub const DEFAULT_EMBEDDING_MODEL: &str = "BAAI/bge-multilingual-gemma2";
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding transport failed after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("embedding service returned HTTP {status} after {attempts} attempt(s): {body}")]
    Service { status: u16, body: String, attempts: u32 },
    #[error("embedding protocol error: {0}")]
    Protocol(String),
}

impl EmbedError {
    fn with_attempts(self, n: u32) -> Self {
        match self {
            EmbedError::Transport { message, .. } => EmbedError::Transport { message, attempts: n },
            EmbedError::Service { status, body, .. } => EmbedError::Service {
                status,
                body,
                attempts: n,
            },
            other => other,
        }
    }
}

impl Retryable for EmbedError {
    fn is_retryable(&self) -> bool {
        match self {
            EmbedError::Transport { .. } => true,
            EmbedError::Service { status, .. } => *status >= 500,
            EmbedError::Protocol(_) => false,
        }
    }
}

impl From<HttpFailure> for EmbedError {
    fn from(f: HttpFailure) -> Self {
        match f {
            HttpFailure::Transport(message) => EmbedError::Transport { message, attempts: 1 },
            HttpFailure::Status { status, body } => EmbedError::Service {
                status,
                body,
                attempts: 1,
            },
            HttpFailure::Decode(m) => EmbedError::Protocol(m),
        }
    }
}

/// A source of text embeddings. `embed` is a single attempt; retries are
/// handled by [`embed_batch`].
pub trait Embedder: Sync {
    fn model_id(&self) -> String;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Hashed character-trigram counts folded into `dim` buckets, unit length.
/// Texts shorter than three characters count as a single gram.
pub fn fallback_embed(text: &str, dim: usize) -> Vec<f32> {
    assert!(dim >= 8, "fallback embedding dimension must be at least 8");
    let chars: Vec<char> = text.chars().collect();
    let mut counts = vec![0f32; dim];
    let mut add = |gram: &[char]| {
        let s: String = gram.iter().collect();
        counts[(fnv1a(s.as_bytes()) % dim as u64) as usize] += 1.0;
    };
    if chars.len() < 3 {
        add(&chars);
    } else {
        chars.windows(3).for_each(&mut add);
    }
    normalize(&counts).expect("at least one gram counted")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackEmbedder {
    pub dim: usize,
}

impl Embedder for FallbackEmbedder {
    fn model_id(&self) -> String {
        format!("fallback-trigram-{}", self.dim)
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts.iter().map(|t| fallback_embed(t, self.dim)).collect())
    }
}

/// Client for a remote embedding service taking `{model, input}`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: JsonClient,
    model: String,
}

impl HttpEmbedder {
    pub fn new(endpoint: &str, model: &str, auth: Option<String>, timeout: Duration) -> Self {
        HttpEmbedder {
            client: JsonClient::new(endpoint, auth, timeout),
            model: model.to_string(),
        }
    }
}

fn parse_vector(v: &Value) -> Result<Vec<f32>, EmbedError> {
    v.as_array()
        .ok_or_else(|| EmbedError::Protocol("embedding is not an array".into()))?
        .iter()
        .map(|x| {
            x.as_f64()
                .map(|f| f as f32)
                .ok_or_else(|| EmbedError::Protocol(format!("non-numeric component {x}")))
        })
        .collect()
}

/// Accepts `{"data": [{"embedding": [...], "index": i}]}`,
/// `{"embeddings": [[...]]}` or a bare `[[...]]`.
fn parse_embeddings(body: &Value) -> Result<Vec<Vec<f32>>, EmbedError> {
    if let Some(data) = body.get("data").and_then(Value::as_array) {
        let mut items = data
            .iter()
            .enumerate()
            .map(|(pos, item)| {
                let idx = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
                let emb = item
                    .get("embedding")
                    .ok_or_else(|| EmbedError::Protocol("data item without embedding".into()))?;
                Ok((idx, parse_vector(emb)?))
            })
            .collect::<Result<Vec<_>, EmbedError>>()?;
        items.sort_by_key(|(i, _)| *i);
        return Ok(items.into_iter().map(|(_, v)| v).collect());
    }
    let list = body.get("embeddings").unwrap_or(body);
    match list.as_array() {
        Some(rows) => rows.iter().map(parse_vector).collect(),
        None => Err(EmbedError::Protocol(format!(
            "unrecognized response shape: {}",
            excerpt(&body.to_string())
        ))),
    }
}

impl Embedder for HttpEmbedder {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let body = self.client.post(&json!({ "model": self.model, "input": texts }))?;
        parse_embeddings(&body)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    pub batch_size: usize,
    pub max_inflight: usize,
    pub retry: RetryPolicy,
    /// Reject vectors of any other dimension.
    pub expected_dim: Option<usize>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            batch_size: 32,
            max_inflight: 4,
            retry: RetryPolicy::default(),
            expected_dim: None,
        }
    }
}

/// Embeds `(pair_id, text)` items, returning unit vectors in input order.
pub fn embed_batch(
    items: &[(String, String)],
    embedder: &dyn Embedder,
    options: &BatchOptions,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let chunks: Vec<&[(String, String)]> = items.chunks(options.batch_size.max(1)).collect();
    let results = bounded_map(&chunks, options.max_inflight, |_, chunk| {
        let texts: Vec<&str> = chunk.iter().map(|(_, t)| t.as_str()).collect();
        let (out, attempts) = options.retry.run(|_| embedder.embed(&texts));
        let vectors = out.map_err(|e| e.with_attempts(attempts))?;
        if vectors.len() != chunk.len() {
            return Err(EmbedError::Protocol(format!(
                "expected {} vectors, got {}",
                chunk.len(),
                vectors.len()
            )));
        }
        Ok(vectors)
    });
    let mut out = Vec::with_capacity(items.len());
    let mut dim = options.expected_dim;
    for (chunk, result) in chunks.iter().zip(results) {
        for ((id, _), v) in chunk.iter().zip(result?) {
            let expected = *dim.get_or_insert(v.len());
            if v.len() != expected || expected == 0 {
                return Err(EmbedError::Protocol(format!(
                    "vector for {id:?} has dimension {}, expected {expected}",
                    v.len()
                )));
            }
            let unit = normalize(&v).ok_or_else(|| EmbedError::Protocol(format!("zero vector for {id:?}")))?;
            out.push(EmbeddingVector::new(id.clone(), unit));
        }
    }
    Ok(out)
}
