//! Experiment runs, score reports, training-data staging, manifests and
//! epoch curves.

mod config;
mod curve;
mod manifest;
mod report;
mod run;
mod stage;

use std::path::{Path, PathBuf};

pub use config::{
    BackendConfig, BackendKind, CorpusPaths, Decoding, EmbeddingConfig, EmbeddingKind, ExperimentConfig, MockKind,
    RetrievalMode, Variant,
};
pub use curve::{curve_csv, epoch_curve, CurveInput, CurveRow};
pub use manifest::{
    generate_training_manifest, EarlyStopping, LoraConfig, ModelLabel, TrainingConfig, TrainingManifest,
};
pub use report::{load_score_records, render_report, Cell, Column, Layout, Row, ScoreRecord, ScoreTable};
pub use run::{
    persist_run, run_experiment, run_id, BackendSummary, IssuedPrompt, RetrievalSummary, RunOutput, RunRecord,
    SegmentRecord, Timing,
};
pub use stage::{stage_italian_phase, PhaseEntry, PromptCompletion, StageManifest};

use crate::backend::BackendError;
use crate::corpus::CorpusError;
use crate::metrics::MetricError;
use crate::prompting::PromptError;
use crate::retrieval::{EmbedError, RetrievalError};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{failed} of {total} segments failed; run aborted")]
    TooManyFailures { failed: usize, total: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Transport,
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            ExperimentError::Embed(EmbedError::Transport { .. } | EmbedError::Service { .. }) => {
                ErrorCategory::Transport
            }
            ExperimentError::Backend(e) if e.is_transport() => ErrorCategory::Transport,
            _ => ErrorCategory::Validation,
        }
    }
}
