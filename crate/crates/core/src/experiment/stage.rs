//! Two-phase training bundles: French-Italian first, French-Monégasque second.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::corpus::{Corpus, LangPair};
use crate::prompting::{Direction, FewShotPrompt, Template};

/// One completion-only training example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptCompletion {
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub order: u32,
    pub file: String,
    pub lang_pair: String,
    pub direction: Direction,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub format: String,
    pub template_id: String,
    pub phases: Vec<PhaseEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn records(
    corpus: &Corpus,
    direction: &Direction,
    template: &Template,
) -> Result<Vec<PromptCompletion>, ExperimentError> {
    corpus
        .pairs()
        .iter()
        .map(|p| {
            let (src, tgt) = direction.orient(p, corpus.lang_pair())?;
            let prompt = FewShotPrompt {
                direction: direction.clone(),
                examples: Vec::new(),
                query: src.to_string(),
                template_id: template.id.clone(),
            };
            Ok(PromptCompletion {
                prompt: template.render(&prompt),
                completion: tgt.to_string(),
            })
        })
        .collect()
}

fn write_jsonl(path: &Path, rows: &[PromptCompletion]) -> Result<(), ExperimentError> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| ExperimentError::io(path, e))
}

/// Writes `phase1.jsonl` (fr/it), `phase2.jsonl` (fr/mo) and `manifest.json`.
///
/// `direction` is the French-Monégasque direction; phase 1 keeps French on
/// the same side.
pub fn stage_italian_phase(
    fr_it: &Corpus,
    fr_mo: &Corpus,
    direction: &Direction,
    template: &Template,
    out_dir: &Path,
) -> Result<StageManifest, ExperimentError> {
    for (corpus, expected) in [(fr_it, LangPair::fr_it()), (fr_mo, LangPair::fr_mo())] {
        if *corpus.lang_pair() != expected {
            return Err(ExperimentError::Config(format!(
                "expected a {expected} corpus, got {}",
                corpus.lang_pair()
            )));
        }
    }
    let from_french = direction.from_french(fr_mo.lang_pair())?;
    let italian = if from_french {
        Direction::new("fr", "it")
    } else {
        Direction::new("it", "fr")
    }?;
    let mut warnings = Vec::new();
    if fr_it.is_empty() {
        let w = "French-Italian corpus is empty; phase 1 bundle has no records".to_string();
        log::warn!("{w}");
        warnings.push(w);
    }
    let phase1 = records(fr_it, &italian, template)?;
    let phase2 = records(fr_mo, direction, template)?;
    fs::create_dir_all(out_dir).map_err(|e| ExperimentError::io(out_dir, e))?;
    write_jsonl(&out_dir.join("phase1.jsonl"), &phase1)?;
    write_jsonl(&out_dir.join("phase2.jsonl"), &phase2)?;
    let manifest = StageManifest {
        format: "prompt_completion".into(),
        template_id: template.id.clone(),
        phases: vec![
            PhaseEntry {
                order: 1,
                file: "phase1.jsonl".into(),
                lang_pair: fr_it.lang_pair().to_string(),
                direction: italian,
                records: phase1.len(),
            },
            PhaseEntry {
                order: 2,
                file: "phase2.jsonl".into(),
                lang_pair: fr_mo.lang_pair().to_string(),
                direction: direction.clone(),
                records: phase2.len(),
            },
        ],
        warnings,
    };
    let path = out_dir.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )
    .map_err(|e| ExperimentError::io(&path, e))?;
    Ok(manifest)
}
