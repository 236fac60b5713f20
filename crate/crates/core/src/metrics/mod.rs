//! Corpus and segment scoring: BLEU, chrF++ and a stemmer-free METEOR.
//!
//! All metrics share [`tokenize`]. Scores are case-sensitive unless
//! [`EvalOptions::lowercase`] is set, and every [`MetricScore`] records the
//! parameters it was computed with.

mod bleu;
mod chrf;
mod meteor;
mod tokenize;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use bleu::{bleu_corpus, bleu_sentence};
pub use chrf::{chrf_pp, chrf_pp_sentence};
pub use meteor::{meteor, meteor_segment};
pub use tokenize::tokenize;

pub(crate) const TOKENIZER_ID: &str = "whitespace+punct-split";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("cannot score an empty segment list")]
    EmptyInput,
    #[error("segment {0}: reference is empty")]
    EmptyReference(usize),
    #[error("hypothesis and reference counts differ ({hypotheses} vs {references})")]
    LengthMismatch { hypotheses: usize, references: usize },
}

/// A hypothesis with its single reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub hypothesis: String,
    pub reference: String,
}

impl SegmentPair {
    pub fn new(hypothesis: impl Into<String>, reference: impl Into<String>) -> Self {
        SegmentPair {
            hypothesis: hypothesis.into(),
            reference: reference.into(),
        }
    }
}

/// Zips line-aligned hypotheses and references.
pub fn zip_segments<H, R>(hypotheses: &[H], references: &[R]) -> Result<Vec<SegmentPair>, MetricError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    Ok(hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| SegmentPair::new(h.as_ref(), r.as_ref()))
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    #[serde(default)]
    pub lowercase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Bleu,
    ChrfPp,
    Meteor,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Bleu, MetricKind::ChrfPp, MetricKind::Meteor];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Bleu => "bleu",
            MetricKind::ChrfPp => "chrf_pp",
            MetricKind::Meteor => "meteor",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Bleu => "BLEU",
            MetricKind::ChrfPp => "chrF++",
            MetricKind::Meteor => "METEOR",
        }
    }

    pub fn score(self, pairs: &[SegmentPair], options: EvalOptions) -> Result<MetricScore, MetricError> {
        match self {
            MetricKind::Bleu => bleu_corpus(pairs, options),
            MetricKind::ChrfPp => chrf_pp(pairs, options),
            MetricKind::Meteor => meteor(pairs, options),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bleu" => Ok(MetricKind::Bleu),
            "chrf_pp" | "chrf++" | "chrfpp" => Ok(MetricKind::ChrfPp),
            "meteor" => Ok(MetricKind::Meteor),
            _ => Err(format!("unknown metric {s:?}")),
        }
    }
}

/// A corpus score with its per-segment breakdown and full parameter record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: MetricKind,
    pub corpus_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_segment: Option<Vec<f64>>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

pub(crate) fn check_pairs(pairs: &[SegmentPair]) -> Result<(), MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    match pairs.iter().position(|p| p.reference.trim().is_empty()) {
        Some(i) => Err(MetricError::EmptyReference(i)),
        None => Ok(()),
    }
}

pub(crate) fn prepare(text: &str, options: EvalOptions) -> std::borrow::Cow<'_, str> {
    if options.lowercase {
        std::borrow::Cow::Owned(text.to_lowercase())
    } else {
        std::borrow::Cow::Borrowed(text)
    }
}

pub(crate) fn base_params(options: EvalOptions) -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("tokenizer".to_string(), Value::from(TOKENIZER_ID)),
        ("lowercase".to_string(), Value::from(options.lowercase)),
        ("references".to_string(), Value::from(1)),
    ])
}

/// Counts the n-grams of `items` for one order.
pub(crate) fn ngram_counts<T: Eq + std::hash::Hash>(items: &[T], n: usize) -> std::collections::HashMap<&[T], usize> {
    let mut counts = std::collections::HashMap::new();
    if n > 0 && items.len() >= n {
        for gram in items.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches between hypothesis and reference counts of one order.
pub(crate) fn clipped_matches<T: Eq + std::hash::Hash>(
    hyp: &std::collections::HashMap<&[T], usize>,
    reference: &std::collections::HashMap<&[T], usize>,
) -> usize {
    hyp.iter()
        .map(|(gram, &c)| reference.get(gram).map_or(0, |&r| c.min(r)))
        .sum()
}
