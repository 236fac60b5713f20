//! Corpus BLEU per training epoch, as CSV.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::metrics::{bleu_corpus, zip_segments, EvalOptions};
use crate::prompting::Direction;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveInput {
    pub epoch: u32,
    pub direction: Direction,
    pub hypotheses: PathBuf,
    pub references: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epoch: u32,
    pub direction: Direction,
    pub bleu: f64,
}

fn read_lines(path: &Path) -> Result<Vec<String>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// One row per (epoch, direction), sorted by epoch then direction.
pub fn epoch_curve(inputs: &[CurveInput], options: EvalOptions) -> Result<Vec<CurveRow>, ExperimentError> {
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        if rows
            .iter()
            .any(|r: &CurveRow| r.epoch == input.epoch && r.direction == input.direction)
        {
            return Err(ExperimentError::Config(format!(
                "epoch {} listed twice for {}",
                input.epoch, input.direction
            )));
        }
        let hyps = read_lines(&input.hypotheses)?;
        let refs = read_lines(&input.references)?;
        let pairs = zip_segments(&hyps, &refs).map_err(|e| {
            ExperimentError::Config(format!(
                "{} vs {}: {e}",
                input.hypotheses.display(),
                input.references.display()
            ))
        })?;
        rows.push(CurveRow {
            epoch: input.epoch,
            direction: input.direction.clone(),
            bleu: bleu_corpus(&pairs, options)?.corpus_value,
        });
    }
    rows.sort_by(|a, b| a.epoch.cmp(&b.epoch).then_with(|| a.direction.cmp(&b.direction)));
    Ok(rows)
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("epoch,direction,bleu\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.4}\n", r.epoch, r.direction, r.bleu));
    }
    out
}
