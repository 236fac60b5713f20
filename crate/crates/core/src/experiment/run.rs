use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, RetrievalMode};
use super::report::ScoreRecord;
use super::ExperimentError;
use crate::backend::{default_max_tokens, translate_batch, TranslationRequest};
use crate::corpus::{load_corpus, LangPair};
use crate::metrics::{EvalOptions, MetricKind, MetricScore, SegmentPair};
use crate::prompting::{build_translation_prompt, FewShotPrompt};
use crate::retrieval::{embed_batch, EmbeddingIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub query_id: String,
    pub source: String,
    pub reference: String,
    /// Empty when the segment failed.
    pub hypothesis: String,
    /// Pair ids of the in-context examples, in prompt order.
    pub examples: Vec<String>,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSummary {
    pub description: String,
    pub requests: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub total_attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSummary {
    pub mode: RetrievalMode,
    pub k: usize,
    pub index_entries: usize,
    pub index_model: String,
    pub embedder_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub wall_ms: u64,
    pub mean_latency_ms: f64,
}

/// Everything a run produced. `timing` is the only non-reproducible part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub segments: Vec<SegmentRecord>,
    pub scores: Vec<MetricScore>,
    pub backend: BackendSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RunRecord {
    pub fn hypotheses(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.hypothesis.as_str())
    }

    pub fn score(&self, metric: MetricKind) -> Option<&MetricScore> {
        self.scores.iter().find(|s| s.metric == metric)
    }

    /// Report input for this run, in display points (METEOR scaled by 100).
    pub fn score_record(&self) -> ScoreRecord {
        ScoreRecord {
            model: self.config.model_label.clone(),
            row_label: Some(self.config.row_label()),
            variant: Some(self.config.variant),
            direction: self.config.direction.clone(),
            scores: self
                .scores
                .iter()
                .map(|s| (s.metric, ScoreRecord::points(s.metric, s.corpus_value)))
                .collect(),
        }
    }

    /// Serialized record without timing; identical for identical runs.
    pub fn reproducible_json(&self) -> String {
        let mut copy = self.clone();
        copy.timing = None;
        serde_json::to_string_pretty(&copy).expect("record serializes") + "\n"
    }
}

/// Run directory name: config name plus 12 hex digits of the snapshot hash.
pub fn run_id(config: &ExperimentConfig) -> String {
    let digest = Sha256::digest(config.to_toml().as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("{}-{hex}", config.name)
}

/// One rendered prompt as sent to the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssuedPrompt {
    pub prompt: FewShotPrompt,
    pub request: TranslationRequest,
}

/// Outcome of [`run_experiment`]: the record, the prompts and the log lines.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub prompts: Vec<IssuedPrompt>,
    pub log: Vec<String>,
}

fn corpus_lang_pair(config: &ExperimentConfig) -> Result<LangPair, ExperimentError> {
    let d = &config.direction;
    let partner = if d.source.as_str() == "fr" {
        &d.target
    } else {
        &d.source
    };
    Ok(LangPair::new("fr", partner.as_str())?)
}

/// Runs one experiment in memory: prompts, translations and scores.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    let started = Instant::now();
    let started_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut log = Vec::new();
    let lang_pair = corpus_lang_pair(config)?;
    let train = load_corpus(&config.resolve(&config.corpus.train), &lang_pair)?;
    let test = load_corpus(&config.resolve(&config.corpus.test), &lang_pair)?;
    if test.is_empty() {
        return Err(ExperimentError::Config("test corpus is empty".into()));
    }
    let template = config.template()?;
    let direction = &config.direction;
    direction.from_french(&lang_pair)?;
    let oriented: Vec<(&str, &str)> = test
        .pairs()
        .iter()
        .map(|p| direction.orient(p, &lang_pair))
        .collect::<Result<_, _>>()?;
    log.push(format!(
        "run {} variant={} direction={} train={} test={}",
        config.name,
        config.variant,
        direction,
        train.len(),
        test.len()
    ));

    // Retrieval: every hit list is computed up front so failures surface early.
    let mut retrieval = None;
    let mut hit_ids: Vec<Vec<(String, f64)>> = vec![Vec::new(); test.len()];
    if config.variant.uses_retrieval() {
        let index_path = config.resolve(config.corpus.index.as_deref().expect("validated"));
        let index = EmbeddingIndex::load(&index_path)?;
        if index.is_empty() {
            return Err(ExperimentError::Config(format!(
                "{}: index is empty; variant {} needs retrieval",
                index_path.display(),
                config.variant
            )));
        }
        if let Some((id, _)) = index.entries().find(|(id, _)| train.get(id).is_none()) {
            return Err(ExperimentError::Config(format!(
                "index entry {id:?} is not in the training corpus"
            )));
        }
        let embedder = config.embedding.embedder()?;
        if embedder.model_id() != index.meta().model {
            log::warn!(
                "index built with {:?} but queries use {:?}",
                index.meta().model,
                embedder.model_id()
            );
        }
        let items: Vec<(String, String)> = test
            .pairs()
            .iter()
            .zip(&oriented)
            .map(|(p, (src, _))| {
                let text = match config.retrieval_mode {
                    RetrievalMode::ReferenceSide => p.fr.clone(),
                    RetrievalMode::SourceSide => src.to_string(),
                };
                (p.id.clone(), text)
            })
            .collect();
        let mut options = config.embedding.batch_options();
        options.expected_dim = Some(index.dim());
        let queries = embed_batch(&items, embedder.as_ref(), &options)?;
        for (slot, q) in hit_ids.iter_mut().zip(&queries) {
            // One extra hit leaves room for dropping the query's own pair.
            *slot = index
                .query_knn(&q.values, config.retrieval_k + 1)?
                .into_iter()
                .map(|h| (h.pair_id.to_string(), h.score))
                .collect();
        }
        retrieval = Some(RetrievalSummary {
            mode: config.retrieval_mode,
            k: config.retrieval_k,
            index_entries: index.len(),
            index_model: index.meta().model.clone(),
            embedder_model: embedder.model_id(),
        });
        log.push(format!(
            "retrieval mode={} k={} index_entries={}",
            config.retrieval_mode.name(),
            config.retrieval_k,
            index.len()
        ));
    }

    let k = if config.variant.uses_retrieval() {
        config.retrieval_k
    } else {
        0
    };
    let mut prompts = Vec::with_capacity(test.len());
    let mut example_ids = Vec::with_capacity(test.len());
    for ((pair, (src, _)), hits) in test.pairs().iter().zip(&oriented).zip(&hit_ids) {
        let hits: Vec<_> = hits
            .iter()
            .map(|(id, score)| crate::retrieval::RetrievalHit {
                pair_id: id,
                score: *score,
            })
            .collect();
        let prompt = build_translation_prompt(src, Some(&pair.id), direction, &hits, &train, &config.template_id, k)?;
        example_ids.push(
            hits.iter()
                .filter(|h| h.pair_id != pair.id)
                .take(prompt.examples.len())
                .map(|h| h.pair_id.to_string())
                .collect::<Vec<_>>(),
        );
        let (system, text) = if template.system_role() {
            (Some(template.instruction_text(direction)), template.body_text(&prompt))
        } else {
            (None, template.render(&prompt))
        };
        let request = TranslationRequest {
            query_id: pair.id.clone(),
            system,
            prompt: text,
            stop: Some(template.stop().to_string()).filter(|s| !s.is_empty()),
            max_tokens: config.backend.max_tokens.unwrap_or_else(|| default_max_tokens(src)),
        };
        prompts.push(IssuedPrompt { prompt, request });
    }

    let backend = config.backend(|| {
        oriented
            .iter()
            .map(|(s, t)| (s.to_string(), t.to_string()))
            .collect::<BTreeMap<_, _>>()
    })?;
    let requests: Vec<TranslationRequest> = prompts.iter().map(|p| p.request.clone()).collect();
    let results = translate_batch(
        &requests,
        backend.as_ref(),
        &config.backend.retry,
        config.backend.max_inflight,
    )?;

    let mut segments = Vec::with_capacity(test.len());
    let mut latencies = Vec::new();
    for (((pair, (src, tgt)), examples), result) in test.pairs().iter().zip(&oriented).zip(example_ids).zip(&results) {
        let (hypothesis, attempts, error) = match result {
            Ok(r) => {
                latencies.push(r.latency_ms as f64);
                (r.hypothesis.clone(), r.attempts, None)
            }
            Err(e) => {
                log.push(format!("segment {} failed: {e}", pair.id));
                let attempts = match e {
                    crate::backend::BackendError::Transport { attempts, .. }
                    | crate::backend::BackendError::Service { attempts, .. } => *attempts,
                    _ => 1,
                };
                (String::new(), attempts, Some(e.to_string()))
            }
        };
        segments.push(SegmentRecord {
            query_id: pair.id.clone(),
            source: src.to_string(),
            reference: tgt.to_string(),
            hypothesis,
            examples,
            attempts,
            error,
        });
    }
    let failed = segments.iter().filter(|s| s.error.is_some()).count();
    let ratio = failed as f64 / segments.len() as f64;
    if ratio > config.max_failure_ratio {
        return Err(ExperimentError::TooManyFailures {
            failed,
            total: segments.len(),
        });
    }

    let pairs: Vec<SegmentPair> = segments
        .iter()
        .map(|s| SegmentPair::new(s.hypothesis.clone(), s.reference.clone()))
        .collect();
    let options = EvalOptions {
        lowercase: config.lowercase,
    };
    let scores = config
        .metrics
        .iter()
        .map(|m| m.score(&pairs, options))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &scores {
        log.push(format!("{} = {:.4}", s.metric.label(), s.corpus_value));
    }

    let backend_summary = BackendSummary {
        description: backend.describe(),
        requests: segments.len(),
        succeeded: segments.len() - failed,
        failed,
        total_attempts: segments.iter().map(|s| s.attempts).sum(),
    };
    let timing = Timing {
        started_unix,
        wall_ms: started.elapsed().as_millis() as u64,
        mean_latency_ms: if latencies.is_empty() {
            0.0
        } else {
            latencies.iter().sum::<f64>() / latencies.len() as f64
        },
    };
    let record = RunRecord {
        run_id: run_id(config),
        config: config.clone(),
        segments,
        scores,
        backend: backend_summary,
        retrieval,
        timing: Some(timing),
    };
    Ok(RunOutput { record, prompts, log })
}

fn write(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|e| ExperimentError::io(path, e))
}

/// Writes a run directory under `out_dir` and returns its path.
pub fn persist_run(output: &RunOutput, out_dir: &Path) -> Result<PathBuf, ExperimentError> {
    let record = &output.record;
    let dir = out_dir.join(&record.run_id);
    fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
    write(&dir.join("config.toml"), &record.config.to_toml())?;
    let mut hyps = String::new();
    for h in record.hypotheses() {
        hyps.push_str(&h.replace(['\n', '\r'], " "));
        hyps.push('\n');
    }
    write(&dir.join("hypotheses.txt"), &hyps)?;
    let mut prompts = String::new();
    for p in &output.prompts {
        prompts.push_str(&serde_json::to_string(&p.request).expect("request serializes"));
        prompts.push('\n');
    }
    write(&dir.join("prompts.jsonl"), &prompts)?;
    write(
        &dir.join("scores.json"),
        &(serde_json::to_string_pretty(&record.score_record()).expect("scores serialize") + "\n"),
    )?;
    write(&dir.join("record.json"), &record.reproducible_json())?;
    if let Some(t) = &record.timing {
        write(
            &dir.join("timing.json"),
            &(serde_json::to_string_pretty(t).expect("timing serializes") + "\n"),
        )?;
    }
    let mut log = String::new();
    for line in &output.log {
        let _ = writeln!(log, "{line}");
    }
    write(&dir.join("run.log"), &log)?;
    Ok(dir)
}
