use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::backend::{CompletionBackend, HttpBackend, MockBackend, MockMode};
use crate::http::secret_from_env;
use crate::metrics::MetricKind;
use crate::prompting::{Direction, Template, TemplateRegistry, TemplateSpec, PLAIN_TEMPLATE};
use crate::retrieval::{Embedder, FallbackEmbedder, HttpEmbedder, DEFAULT_EMBEDDING_MODEL, DEFAULT_K};
use crate::retry::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Base,
    Rag,
    /// RAG on top of a model staged through French-Italian first.
    RagPlusItalian,
}

impl Variant {
    pub fn uses_retrieval(self) -> bool {
        self != Variant::Base
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Rag => "rag",
            Variant::RagPlusItalian => "rag_plus_italian",
        }
    }

    /// Default report row label.
    pub fn row_label(self) -> &'static str {
        match self {
            Variant::Base => "",
            Variant::Rag => "+ RAG",
            Variant::RagPlusItalian => "++ Italian corpus",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Variant::Base),
            "rag" => Ok(Variant::Rag),
            "rag_plus_italian" => Ok(Variant::RagPlusItalian),
            _ => Err(format!("unknown variant {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    /// Embed the French member of the test pair.
    #[default]
    ReferenceSide,
    /// Embed the text being translated.
    SourceSide,
}

impl RetrievalMode {
    pub fn name(self) -> &'static str {
        match self {
            RetrievalMode::ReferenceSide => "reference_side",
            RetrievalMode::SourceSide => "source_side",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockKind {
    /// Answers every test query with its reference translation.
    #[default]
    Reference,
    /// Answers with the query itself.
    Echo,
    /// Answers from a JSON object file mapping query text to output.
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoding {
    #[default]
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_inflight")]
    pub max_inflight: usize,
    #[serde(default)]
    pub decoding: Decoding,
    /// Fixed generation budget; defaults to 4 tokens per source token, min 64.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub mock: MockKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_table: Option<PathBuf>,
}

fn default_timeout() -> u64 {
    60
}

fn default_inflight() -> usize {
    4
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model: None,
            auth_env: None,
            timeout_secs: default_timeout(),
            max_inflight: default_inflight(),
            decoding: Decoding::Greedy,
            max_tokens: None,
            retry: RetryPolicy::default(),
            mock: MockKind::Reference,
            mock_table: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    #[default]
    Fallback,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default)]
    pub kind: EmbeddingKind,
    /// Fallback embedder dimension.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_embedding_model")]
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_inflight")]
    pub max_inflight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_dim() -> usize {
    256
}

fn default_embedding_model() -> String {
    DEFAULT_EMBEDDING_MODEL.into()
}

fn default_batch() -> usize {
    32
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            kind: EmbeddingKind::Fallback,
            dim: default_dim(),
            endpoint: None,
            model: default_embedding_model(),
            auth_env: None,
            timeout_secs: default_timeout(),
            batch_size: default_batch(),
            max_inflight: default_inflight(),
            retry: RetryPolicy::default(),
        }
    }
}

impl EmbeddingConfig {
    pub fn embedder(&self) -> Result<Box<dyn Embedder>, ExperimentError> {
        match self.kind {
            EmbeddingKind::Fallback => {
                if self.dim < 8 {
                    return Err(ExperimentError::Config("embedding.dim must be at least 8".into()));
                }
                Ok(Box::new(FallbackEmbedder { dim: self.dim }))
            }
            EmbeddingKind::Http => {
                let endpoint = self.endpoint.as_deref().ok_or_else(|| {
                    ExperimentError::Config("embedding.endpoint is required for kind = \"http\"".into())
                })?;
                Ok(Box::new(HttpEmbedder::new(
                    endpoint,
                    &self.model,
                    secret_from_env(self.auth_env.as_deref()),
                    Duration::from_secs(self.timeout_secs),
                )))
            }
        }
    }

    pub fn batch_options(&self) -> crate::retrieval::BatchOptions {
        crate::retrieval::BatchOptions {
            batch_size: self.batch_size,
            max_inflight: self.max_inflight,
            retry: self.retry.clone(),
            expected_dim: None,
        }
    }
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_template() -> String {
    PLAIN_TEMPLATE.into()
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::Bleu, MetricKind::ChrfPp, MetricKind::Meteor]
}

fn default_failure_ratio() -> f64 {
    0.5
}

/// One experiment run as declared in a TOML file. Relative paths resolve
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Model label used to group report rows, e.g. `LYRA-G`.
    pub model_label: String,
    /// Report row label; defaults to one derived from the variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_label: Option<String>,
    pub direction: Direction,
    pub variant: Variant,
    #[serde(default = "default_k")]
    pub retrieval_k: usize,
    #[serde(default)]
    pub retrieval_mode: RetrievalMode,
    #[serde(default = "default_template")]
    pub template_id: String,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    #[serde(default)]
    pub lowercase: bool,
    /// Abort when more than this share of segments fail.
    #[serde(default = "default_failure_ratio")]
    pub max_failure_ratio: f64,
    pub corpus: CorpusPaths,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub templates: BTreeMap<String, TemplateSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let mut config: ExperimentConfig = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn row_label(&self) -> String {
        self.row_label
            .clone()
            .unwrap_or_else(|| self.variant.row_label().to_string())
    }

    /// Checks everything that does not require reading data files.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be non-empty and contain no path separators");
        }
        if self.retrieval_k == 0 {
            return bad("retrieval_k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.max_failure_ratio) {
            return bad("max_failure_ratio must lie in [0, 1]");
        }
        if self.metrics.is_empty() {
            return bad("at least one metric is required");
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(m) = self.metrics.iter().find(|m| !seen.insert(**m)) {
            return Err(ExperimentError::Config(format!("metric {m} listed twice")));
        }
        match (self.variant.uses_retrieval(), &self.corpus.index) {
            (true, None) => return bad("variants rag and rag_plus_italian require corpus.index"),
            (false, Some(_)) => return bad("variant base must not set corpus.index"),
            _ => {}
        }
        if !self.direction.source.as_str().eq("fr") && !self.direction.target.as_str().eq("fr") {
            return bad("direction must have French on one side");
        }
        if self.backend.max_inflight == 0 {
            return bad("backend.max_inflight must be at least 1");
        }
        if self.backend.retry.max_attempts == 0 {
            return bad("backend.retry.max_attempts must be at least 1");
        }
        if self.backend.kind == BackendKind::Http && (self.backend.endpoint.is_none() || self.backend.model.is_none()) {
            return bad("backend.endpoint and backend.model are required for kind = \"http\"");
        }
        if self.backend.kind == BackendKind::Mock
            && self.backend.mock == MockKind::Table
            && self.backend.mock_table.is_none()
        {
            return bad("backend.mock_table is required for mock = \"table\"");
        }
        self.templates()?.get(&self.template_id)?;
        Ok(())
    }

    pub fn templates(&self) -> Result<TemplateRegistry, ExperimentError> {
        let mut registry = TemplateRegistry::default();
        for (id, spec) in &self.templates {
            registry.register(id, spec.clone())?;
        }
        Ok(registry)
    }

    pub fn template(&self) -> Result<Template, ExperimentError> {
        Ok(self.templates()?.get(&self.template_id)?.clone())
    }

    /// Builds the configured backend. `reference_table` feeds the reference mock.
    pub fn backend(
        &self,
        reference_table: impl FnOnce() -> BTreeMap<String, String>,
    ) -> Result<Box<dyn CompletionBackend>, ExperimentError> {
        let b = &self.backend;
        match b.kind {
            BackendKind::Http => Ok(Box::new(HttpBackend::new(
                b.endpoint.as_deref().unwrap_or_default(),
                b.model.as_deref().unwrap_or_default(),
                secret_from_env(b.auth_env.as_deref()),
                Duration::from_secs(b.timeout_secs),
            ))),
            BackendKind::Mock => {
                let template = self.template()?;
                let mode = match b.mock {
                    MockKind::Echo => MockMode::Echo,
                    MockKind::Reference => MockMode::Table(reference_table().into_iter().collect()),
                    MockKind::Table => {
                        let path = self.resolve(b.mock_table.as_deref().unwrap_or(Path::new("")));
                        let text = std::fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
                        let map: BTreeMap<String, String> = serde_json::from_str(&text)
                            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
                        MockMode::Table(map.into_iter().collect())
                    }
                };
                Ok(Box::new(MockBackend::new(template, mode)))
            }
        }
    }
}
