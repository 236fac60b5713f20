//! Few-shot translation prompts built from retrieved corpus pairs.

mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LangCode, LangPair, ParallelPair};
use crate::retrieval::RetrievalHit;

pub use template::{escape, unescape, Template, TemplateRegistry, TemplateSpec, CHAT_TEMPLATE, PLAIN_TEMPLATE};

/// Languages a direction may name.
pub const LANGUAGES: [&str; 3] = ["fr", "mo", "it"];

pub fn language_name(code: &str) -> &'static str {
    match code {
        "fr" => "French",
        "mo" => "Monégasque",
        "it" => "Italian",
        _ => "Unknown",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("invalid direction {0:?}")]
    Direction(String),
    #[error("direction {direction} does not fit a {lang_pair} corpus")]
    Orientation { direction: String, lang_pair: String },
    #[error("retrieved pair {0:?} is not in the corpus")]
    UnknownPairId(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("invalid template {0:?}: {1}")]
    InvalidTemplate(String, String),
    #[error("text does not match template {0:?}")]
    Parse(String),
}

/// Translation direction, written `fr-mo` (also accepts `fr->mo`, `fr→mo`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Direction {
    pub source: LangCode,
    pub target: LangCode,
}

impl Direction {
    pub fn new(source: &str, target: &str) -> Result<Self, PromptError> {
        let bad = || PromptError::Direction(format!("{source}-{target}"));
        if source == target || !LANGUAGES.contains(&source) || !LANGUAGES.contains(&target) {
            return Err(bad());
        }
        Ok(Direction {
            source: LangCode::new(source).map_err(|_| bad())?,
            target: LangCode::new(target).map_err(|_| bad())?,
        })
    }

    pub fn reversed(&self) -> Self {
        Direction {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }

    /// Whether the source side is the French member of `lang_pair`.
    pub fn from_french(&self, lang_pair: &LangPair) -> Result<bool, PromptError> {
        if self.source == lang_pair.fr && self.target == lang_pair.partner {
            Ok(true)
        } else if self.source == lang_pair.partner && self.target == lang_pair.fr {
            Ok(false)
        } else {
            Err(PromptError::Orientation {
                direction: self.to_string(),
                lang_pair: lang_pair.to_string(),
            })
        }
    }

    /// `(source text, target text)` of `pair` in this direction.
    pub fn orient<'a>(&self, pair: &'a ParallelPair, lang_pair: &LangPair) -> Result<(&'a str, &'a str), PromptError> {
        Ok(if self.from_french(lang_pair)? {
            (&pair.fr, &pair.partner)
        } else {
            (&pair.partner, &pair.fr)
        })
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

impl FromStr for Direction {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = ["->", "→", "-", ">"]
            .iter()
            .find_map(|sep| s.split_once(sep))
            .ok_or_else(|| PromptError::Direction(s.to_string()))?;
        Direction::new(a.trim(), b.trim())
    }
}

impl TryFrom<String> for Direction {
    type Error = PromptError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Direction> for String {
    fn from(d: Direction) -> Self {
        d.to_string()
    }
}

/// A prompt before rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotPrompt {
    pub direction: Direction,
    /// `(source, target)` in descending retrieval score.
    pub examples: Vec<(String, String)>,
    pub query: String,
    pub template_id: String,
}

/// Builds a prompt from retrieval hits. Hits on `query_id` itself are dropped
/// before keeping the best `k`.
pub fn build_translation_prompt(
    query: &str,
    query_id: Option<&str>,
    direction: &Direction,
    hits: &[RetrievalHit<'_>],
    corpus: &Corpus,
    template_id: &str,
    k: usize,
) -> Result<FewShotPrompt, PromptError> {
    let mut ranked: Vec<&RetrievalHit<'_>> = hits.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.pair_id.cmp(b.pair_id)));
    let mut examples = Vec::with_capacity(k.min(hits.len()));
    for hit in ranked {
        let pair = corpus
            .get(hit.pair_id)
            .ok_or_else(|| PromptError::UnknownPairId(hit.pair_id.to_string()))?;
        if Some(hit.pair_id) == query_id || examples.len() == k {
            continue;
        }
        let (src, tgt) = direction.orient(pair, corpus.lang_pair())?;
        examples.push((src.to_string(), tgt.to_string()));
    }
    Ok(FewShotPrompt {
        direction: direction.clone(),
        examples,
        query: query.to_string(),
        template_id: template_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PairKind;
    use proptest::prelude::*;

    fn corpus(n: usize) -> Corpus {
        let pairs = (0..n)
            .map(|i| {
                ParallelPair::new(
                    format!("p{i:02}"),
                    format!("fr {i}"),
                    format!("mo {i}"),
                    PairKind::Sentence,
                    "t",
                )
            })
            .collect();
        Corpus::new(pairs, LangPair::fr_mo()).unwrap()
    }

    fn hits(ids: &[(&'static str, f64)]) -> Vec<RetrievalHit<'static>> {
        ids.iter()
            .map(|&(pair_id, score)| RetrievalHit { pair_id, score })
            .collect()
    }

    #[test]
    fn direction_parsing() {
        let d: Direction = "fr->mo".parse().unwrap();
        assert_eq!(d.to_string(), "fr-mo");
        assert_eq!("mo→fr".parse::<Direction>().unwrap(), d.reversed());
        assert!("fr-fr".parse::<Direction>().is_err());
        assert!("fr-de".parse::<Direction>().is_err());
        assert!(d.from_french(&LangPair::fr_it()).is_err());
    }

    #[test]
    fn zero_hits_is_zero_shot() {
        let d = Direction::new("fr", "mo").unwrap();
        let p = build_translation_prompt("q", None, &d, &[], &corpus(3), PLAIN_TEMPLATE, 10).unwrap();
        assert!(p.examples.is_empty());
    }

    #[test]
    fn ten_hits_in_score_order() {
        let c = corpus(12);
        let ids: Vec<&'static str> = (0..12)
            .map(|i| &*Box::leak(format!("p{i:02}").into_boxed_str()))
            .collect();
        let h: Vec<RetrievalHit<'static>> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| RetrievalHit {
                pair_id: id,
                score: i as f64 / 20.0,
            })
            .collect();
        let d = Direction::new("fr", "mo").unwrap();
        let p = build_translation_prompt("q", None, &d, &h, &c, PLAIN_TEMPLATE, 10).unwrap();
        assert_eq!(p.examples.len(), 10);
        assert_eq!(p.examples[0], ("fr 11".to_string(), "mo 11".to_string()));
        assert_eq!(p.examples[9].0, "fr 2");

        let back = build_translation_prompt("q", None, &d.reversed(), &h, &c, PLAIN_TEMPLATE, 10).unwrap();
        assert_eq!(back.examples[0], ("mo 11".to_string(), "fr 11".to_string()));
    }

    #[test]
    fn self_exclusion_before_truncation() {
        let c = corpus(3);
        let d = Direction::new("fr", "mo").unwrap();
        let h = hits(&[("p00", 1.0), ("p01", 0.5), ("p02", 0.2)]);
        let p = build_translation_prompt("fr 0", Some("p00"), &d, &h, &c, PLAIN_TEMPLATE, 2).unwrap();
        assert_eq!(
            p.examples,
            vec![("fr 1".into(), "mo 1".into()), ("fr 2".into(), "mo 2".into())]
        );
    }

    #[test]
    fn unknown_hit() {
        let d = Direction::new("fr", "mo").unwrap();
        let err = build_translation_prompt("q", None, &d, &hits(&[("zz", 1.0)]), &corpus(1), PLAIN_TEMPLATE, 1);
        assert_eq!(err, Err(PromptError::UnknownPairId("zz".into())));
    }

    fn text() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::sample::select(vec!["a", "é", " ", "→", "\n", "\\", "n", "u2192", "\r", "{src}"]),
            0..8,
        )
        .prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn parse_back_recovers_structure(
            examples in prop::collection::vec((text(), text()), 0..6),
            query in text(),
            dir in prop::sample::select(vec![("fr", "mo"), ("mo", "fr"), ("fr", "it"), ("it", "fr")]),
            template in prop::sample::select(vec![PLAIN_TEMPLATE, CHAT_TEMPLATE]),
        ) {
            let reg = TemplateRegistry::default();
            let p = FewShotPrompt {
                direction: Direction::new(dir.0, dir.1).unwrap(),
                examples,
                query,
                template_id: template.into(),
            };
            let text = reg.render(&p).unwrap();
            prop_assert_eq!(&text, &reg.render(&p).unwrap());
            prop_assert_eq!(reg.get(template).unwrap().parse(&text).unwrap(), p);
        }

        #[test]
        fn truncation_is_monotone(scores in prop::collection::vec(0.0f64..1.0, 0..20), k1 in 0usize..20, k2 in 0usize..20) {
            let c = corpus(20);
            let ids: Vec<String> = (0..scores.len()).map(|i| format!("p{i:02}")).collect();
            let h: Vec<RetrievalHit<'_>> = ids.iter().zip(&scores).map(|(id, &score)| RetrievalHit { pair_id: id, score }).collect();
            let d = Direction::new("mo", "fr").unwrap();
            let (lo, hi) = (k1.min(k2), k1.max(k2));
            let a = build_translation_prompt("q", Some("p03"), &d, &h, &c, PLAIN_TEMPLATE, lo).unwrap();
            let b = build_translation_prompt("q", Some("p03"), &d, &h, &c, PLAIN_TEMPLATE, hi).unwrap();
            prop_assert_eq!(&a.examples[..], &b.examples[..a.examples.len()]);
            prop_assert!(!b.examples.contains(&("mo 3".to_string(), "fr 3".to_string())));
        }
    }
}
