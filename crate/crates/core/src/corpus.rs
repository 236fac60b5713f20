//! Parallel corpus model, JSONL persistence, count validation and splitting.
//!
//! A corpus file holds one JSON object per line with the keys `id`, `fr`,
//! `<partner>`, `kind` and `source`, where `<partner>` is the second code of
//! the corpus language pair (`mo` for the French-Monégasque data, `it` for the
//! French-Italian staging data). Text is stored exactly as given.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::rng::SplitMix64;

/// Number of sentence pairs in the published French-Monégasque dataset.
pub const PUBLISHED_SENTENCE_PAIRS: usize = 10_794;
/// Dictionary, conjugation and proverb entries in the published dataset.
pub const PUBLISHED_LEXICAL_ENTRIES: usize = 42_698;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate id {id:?} (first at record {first}, again at record {second})")]
    DuplicateId { id: String, first: usize, second: usize },
    #[error("record {record} ({id:?}): {side} text is empty")]
    EmptyText { record: usize, id: String, side: String },
    #[error("invalid language code {0:?} (expected 2-3 lowercase ASCII letters)")]
    LangCode(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("unknown test id {0:?}")]
    UnknownId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// What kind of aligned unit a pair is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Sentence,
    Dictionary,
    Conjugation,
    Proverb,
}

impl PairKind {
    pub const ALL: [PairKind; 4] = [
        PairKind::Sentence,
        PairKind::Dictionary,
        PairKind::Conjugation,
        PairKind::Proverb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::Sentence => "sentence",
            PairKind::Dictionary => "dictionary",
            PairKind::Conjugation => "conjugation",
            PairKind::Proverb => "proverb",
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PairKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown kind {s:?}"))
    }
}

/// A language code such as `fr`, `mo` or `it`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: &str) -> Result<Self, CorpusError> {
        let ok = (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
        if ok {
            Ok(LangCode(code.to_string()))
        } else {
            Err(CorpusError::LangCode(code.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LangCode {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        LangCode::new(&value)
    }
}

impl From<LangCode> for String {
    fn from(code: LangCode) -> Self {
        code.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The language pair a corpus covers. The first code is always the French side.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LangPair {
    pub fr: LangCode,
    pub partner: LangCode,
}

impl LangPair {
    pub fn new(fr: &str, partner: &str) -> Result<Self, CorpusError> {
        Ok(LangPair {
            fr: LangCode::new(fr)?,
            partner: LangCode::new(partner)?,
        })
    }

    pub fn fr_mo() -> Self {
        LangPair::new("fr", "mo").expect("static codes")
    }

    pub fn fr_it() -> Self {
        LangPair::new("fr", "it").expect("static codes")
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.fr, self.partner)
    }
}

/// One aligned French / partner-language unit.
///
/// `partner` holds Monégasque for the main corpus and Italian for the staging
/// corpus; the corpus [`LangPair`] says which.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub id: String,
    pub fr: String,
    pub partner: String,
    pub kind: PairKind,
    pub source: String,
}

impl ParallelPair {
    pub fn new(
        id: impl Into<String>,
        fr: impl Into<String>,
        partner: impl Into<String>,
        kind: PairKind,
        source: impl Into<String>,
    ) -> Self {
        ParallelPair {
            id: id.into(),
            fr: fr.into(),
            partner: partner.into(),
            kind,
            source: source.into(),
        }
    }
}

/// An ordered, validated collection of pairs with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pairs: Vec<ParallelPair>,
    lang_pair: LangPair,
}

impl Corpus {
    pub fn empty(lang_pair: LangPair) -> Self {
        Corpus {
            pairs: Vec::new(),
            lang_pair,
        }
    }

    /// Builds a corpus, enforcing non-empty text and unique ids.
    pub fn new(pairs: Vec<ParallelPair>, lang_pair: LangPair) -> Result<Self, CorpusError> {
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(pairs.len());
        for (i, pair) in pairs.iter().enumerate() {
            let record = i + 1;
            for (side, text) in [
                (lang_pair.fr.as_str(), &pair.fr),
                (lang_pair.partner.as_str(), &pair.partner),
            ] {
                if text.trim().is_empty() {
                    return Err(CorpusError::EmptyText {
                        record,
                        id: pair.id.clone(),
                        side: side.to_string(),
                    });
                }
            }
            if let Some(first) = seen.insert(pair.id.as_str(), record) {
                return Err(CorpusError::DuplicateId {
                    id: pair.id.clone(),
                    first,
                    second: record,
                });
            }
        }
        Ok(Corpus { pairs, lang_pair })
    }

    pub fn pairs(&self) -> &[ParallelPair] {
        &self.pairs
    }

    pub fn lang_pair(&self) -> &LangPair {
        &self.lang_pair
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ParallelPair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    /// Id → position lookup table.
    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.pairs.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.id.as_str())
    }

    pub fn into_pairs(self) -> Vec<ParallelPair> {
        self.pairs
    }
}

fn field<'a>(
    obj: &'a serde_json::Map<String, Value>,
    key: &str,
    path: &Path,
    line: usize,
) -> Result<&'a str, CorpusError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(CorpusError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("field {key:?} must be a string"),
        }),
        None => Err(CorpusError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("missing field {key:?}"),
        }),
    }
}

/// Reads a JSONL corpus file. Blank lines are skipped; record order is kept.
pub fn load_corpus(path: &Path, lang_pair: &LangPair) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(CorpusError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: "record is not a JSON object".into(),
            });
        };
        let kind_str = field(&obj, "kind", path, lineno)?;
        let kind = kind_str.parse().map_err(|message| CorpusError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        })?;
        pairs.push(ParallelPair {
            id: field(&obj, "id", path, lineno)?.to_string(),
            fr: field(&obj, lang_pair.fr.as_str(), path, lineno)?.to_string(),
            partner: field(&obj, lang_pair.partner.as_str(), path, lineno)?.to_string(),
            kind,
            source: field(&obj, "source", path, lineno)?.to_string(),
        });
    }
    Corpus::new(pairs, lang_pair.clone())
}

/// Serializes one record with a fixed key order.
pub fn record_line(pair: &ParallelPair, lang_pair: &LangPair) -> String {
    let s = |t: &str| serde_json::to_string(t).expect("string serialization");
    format!(
        "{{\"id\":{},\"{}\":{},\"{}\":{},\"kind\":\"{}\",\"source\":{}}}",
        s(&pair.id),
        lang_pair.fr,
        s(&pair.fr),
        lang_pair.partner,
        s(&pair.partner),
        pair.kind,
        s(&pair.source)
    )
}

pub fn export_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for pair in corpus.pairs() {
        writeln!(out, "{}", record_line(pair, corpus.lang_pair())).map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

/// Reads the opus-books French-Italian dump: one `fr<TAB>it` pair per line.
///
/// Ids are synthesized as `opus-000001`, `opus-000002`, ... in file order.
pub fn ingest_opus_books(path: &Path) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let ragged = |side: &str| CorpusError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("record {} has no {side} side", pairs.len() + 1),
        };
        let (fr, it) = line.split_once('\t').ok_or_else(|| ragged("Italian"))?;
        if fr.trim().is_empty() {
            return Err(ragged("French"));
        }
        if it.trim().is_empty() || it.contains('\t') {
            return Err(ragged("Italian"));
        }
        pairs.push(ParallelPair::new(
            format!("opus-{:06}", pairs.len() + 1),
            fr,
            it,
            PairKind::Sentence,
            "opus-books",
        ));
    }
    Corpus::new(pairs, LangPair::fr_it())
}

/// A bucket in a count table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CountKey {
    Kind(PairKind),
    /// Every non-sentence kind combined.
    Other,
    Total,
}

impl fmt::Display for CountKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountKey::Kind(k) => write!(f, "{k}"),
            CountKey::Other => f.write_str("other"),
            CountKey::Total => f.write_str("total"),
        }
    }
}

impl FromStr for CountKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "other" => Ok(CountKey::Other),
            "total" => Ok(CountKey::Total),
            _ => s.parse().map(CountKey::Kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountCheck {
    pub key: CountKey,
    pub expected: usize,
    pub actual: usize,
}

impl CountCheck {
    pub fn delta(&self) -> i64 {
        self.actual as i64 - self.expected as i64
    }

    pub fn passed(&self) -> bool {
        self.actual == self.expected
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountReport {
    pub checks: Vec<CountCheck>,
}

impl CountReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CountCheck::passed)
    }
}

impl fmt::Display for CountReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<12} expected {:>8} actual {:>8} delta {:+} {}",
                c.key.to_string(),
                c.expected,
                c.actual,
                c.delta(),
                if c.passed() { "ok" } else { "MISMATCH" }
            )?;
        }
        write!(f, "overall: {}", if self.passed() { "pass" } else { "fail" })
    }
}

/// The expected counts for the published dataset.
pub fn published_counts() -> BTreeMap<CountKey, usize> {
    BTreeMap::from([
        (CountKey::Kind(PairKind::Sentence), PUBLISHED_SENTENCE_PAIRS),
        (CountKey::Other, PUBLISHED_LEXICAL_ENTRIES),
    ])
}

pub fn validate_counts(corpus: &Corpus, expected: &BTreeMap<CountKey, usize>) -> CountReport {
    let count_kind = |k: PairKind| corpus.pairs().iter().filter(|p| p.kind == k).count();
    let checks = expected
        .iter()
        .map(|(&key, &expected)| {
            let actual = match key {
                CountKey::Kind(k) => count_kind(k),
                CountKey::Other => corpus.len() - count_kind(PairKind::Sentence),
                CountKey::Total => corpus.len(),
            };
            CountCheck { key, expected, actual }
        })
        .collect();
    CountReport { checks }
}

/// How to carve a test set out of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitSpec {
    ExplicitIds { test_ids: Vec<String> },
    SeededRandom { seed: u64, test_fraction: f64 },
}

/// Splits into `(train, test)`, both in corpus order.
///
/// `SeededRandom` shuffles record positions with a Fisher-Yates pass driven
/// by SplitMix64 (see [`crate::rng`]) and takes the first
/// `round(fraction * len)` positions as the test set.
pub fn split_train_test(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus), CorpusError> {
    let test_positions: HashSet<usize> = match spec {
        SplitSpec::ExplicitIds { test_ids } => {
            let index = corpus.id_index();
            test_ids
                .iter()
                .map(|id| {
                    index
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| CorpusError::UnknownId(id.clone()))
                })
                .collect::<Result<_, _>>()?
        }
        SplitSpec::SeededRandom { seed, test_fraction } => {
            if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                return Err(CorpusError::Split(format!(
                    "test_fraction must be in (0, 1), got {test_fraction}"
                )));
            }
            let n = corpus.len();
            let take = (test_fraction * n as f64).round() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            SplitMix64::new(*seed).shuffle(&mut order);
            order.truncate(take);
            order.into_iter().collect()
        }
    };
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, pair) in corpus.pairs().iter().enumerate() {
        if test_positions.contains(&i) {
            test.push(pair.clone());
        } else {
            train.push(pair.clone());
        }
    }
    let lp = corpus.lang_pair().clone();
    Ok((
        Corpus {
            pairs: train,
            lang_pair: lp.clone(),
        },
        Corpus {
            pairs: test,
            lang_pair: lp,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, kind: PairKind) -> ParallelPair {
        ParallelPair::new(id, format!("fr {id}"), format!("mo {id}"), kind, "test")
    }

    fn corpus(n: usize) -> Corpus {
        let pairs = (0..n).map(|i| pair(&format!("p{i:03}"), PairKind::Sentence)).collect();
        Corpus::new(pairs, LangPair::fr_mo()).unwrap()
    }

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn load_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "c.jsonl", "");
        assert!(load_corpus(&path, &LangPair::fr_mo()).unwrap().is_empty());
    }

    #[test]
    fn load_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let body = concat!(
            r#"{"id":"b","fr":"Bonjour","mo":"Bungiurnu","kind":"sentence","source":"x"}"#,
            "\n",
            r#"{"id":"a","fr":"cœur","mo":"cœ","kind":"dictionary","source":"dico"}"#,
            "\n"
        );
        let path = write_file(&dir, "c.jsonl", body);
        let c = load_corpus(&path, &LangPair::fr_mo()).unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), ["b", "a"]);
        assert_eq!(c.pairs()[1].kind, PairKind::Dictionary);
    }

    #[test]
    fn missing_field_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let body = concat!(
            r#"{"id":"a","fr":"x","mo":"y","kind":"sentence","source":"s"}"#,
            "\n",
            r#"{"id":"b","fr":"x","kind":"sentence","source":"s"}"#,
            "\n"
        );
        let path = write_file(&dir, "c.jsonl", body);
        let err = load_corpus(&path, &LangPair::fr_mo()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("\"mo\""));
    }

    #[test]
    fn duplicate_id_names_both_records() {
        let err = Corpus::new(
            vec![
                pair("a", PairKind::Sentence),
                pair("b", PairKind::Sentence),
                pair("a", PairKind::Proverb),
            ],
            LangPair::fr_mo(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            CorpusError::DuplicateId {
                first: 1,
                second: 3,
                ..
            }
        ));
    }

    #[test]
    fn empty_text_rejected() {
        let mut p = pair("a", PairKind::Sentence);
        p.partner = "  ".into();
        let err = Corpus::new(vec![p], LangPair::fr_mo()).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText { ref side, .. } if side == "mo"));
    }

    #[test]
    fn lang_codes_validated() {
        assert!(LangCode::new("fr").is_ok());
        assert!(LangCode::new("lij").is_ok());
        assert!(LangCode::new("FR").is_err());
        assert!(LangCode::new("f").is_err());
    }

    #[test]
    fn export_roundtrip_unicode() {
        let dir = tempfile::tempdir().unwrap();
        let c = Corpus::new(
            vec![
                ParallelPair::new(
                    "1",
                    "Ô Monaco la belle",
                    "O belu Münegu",
                    PairKind::Sentence,
                    "calendari",
                ),
                ParallelPair::new("2", "cœur \"tab\"\there", "cœ\u{30d}", PairKind::Dictionary, "dico"),
            ],
            LangPair::fr_mo(),
        )
        .unwrap();
        let path = dir.path().join("out/c.jsonl");
        export_corpus(&c, &path).unwrap();
        assert_eq!(load_corpus(&path, &LangPair::fr_mo()).unwrap(), c);
    }

    #[test]
    fn export_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        export_corpus(&Corpus::empty(LangPair::fr_mo()), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap().len(), 0);
        assert!(load_corpus(&path, &LangPair::fr_mo()).unwrap().is_empty());
    }

    #[test]
    fn opus_books() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "o.tsv", "a\tb\nc\td\ne\tf\ng\th\ni\tj\n");
        let c = ingest_opus_books(&path).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.lang_pair(), &LangPair::fr_it());
        assert_eq!(c.pairs()[4].id, "opus-000005");

        let empty = write_file(&dir, "e.tsv", "");
        assert!(ingest_opus_books(&empty).unwrap().is_empty());

        let ragged = write_file(&dir, "r.tsv", "a\tb\nc\t\n");
        let err = ingest_opus_books(&ragged).unwrap_err();
        assert!(err.to_string().contains("record 2"), "{err}");
    }

    #[test]
    fn counts() {
        let c = corpus(3);
        let ok = validate_counts(&c, &BTreeMap::from([(CountKey::Kind(PairKind::Sentence), 3)]));
        assert!(ok.passed());
        let bad = validate_counts(&c, &BTreeMap::from([(CountKey::Kind(PairKind::Sentence), 4)]));
        assert!(!bad.passed());
        assert_eq!(bad.checks[0].delta(), -1);
    }

    #[test]
    fn published_count_table() {
        let mut pairs = Vec::with_capacity(PUBLISHED_SENTENCE_PAIRS + PUBLISHED_LEXICAL_ENTRIES);
        for i in 0..PUBLISHED_SENTENCE_PAIRS {
            pairs.push(pair(&format!("s{i}"), PairKind::Sentence));
        }
        let others = [PairKind::Dictionary, PairKind::Conjugation, PairKind::Proverb];
        for i in 0..PUBLISHED_LEXICAL_ENTRIES {
            pairs.push(pair(&format!("d{i}"), others[i % 3]));
        }
        let c = Corpus::new(pairs, LangPair::fr_mo()).unwrap();
        assert!(validate_counts(&c, &published_counts()).passed());
    }

    #[test]
    fn explicit_split_extremes() {
        let c = corpus(4);
        let all = SplitSpec::ExplicitIds {
            test_ids: c.ids().map(String::from).collect(),
        };
        let (train, test) = split_train_test(&c, &all).unwrap();
        assert!(train.is_empty());
        assert_eq!(test, c);

        let none = SplitSpec::ExplicitIds { test_ids: vec![] };
        let (train, test) = split_train_test(&c, &none).unwrap();
        assert_eq!(train, c);
        assert!(test.is_empty());

        let bad = SplitSpec::ExplicitIds {
            test_ids: vec!["nope".into()],
        };
        assert!(matches!(split_train_test(&c, &bad), Err(CorpusError::UnknownId(id)) if id == "nope"));
    }

    #[test]
    fn seeded_split_is_deterministic() {
        let c = corpus(100);
        let spec = SplitSpec::SeededRandom {
            seed: 42,
            test_fraction: 0.1,
        };
        let (train1, test1) = split_train_test(&c, &spec).unwrap();
        let (train2, test2) = split_train_test(&c, &spec).unwrap();
        assert_eq!(test1.len(), 10);
        assert_eq!(train1.len(), 90);
        assert_eq!(test1, test2);
        assert_eq!(train1, train2);
    }

    #[test]
    fn seeded_split_rejects_bad_fraction() {
        let spec = SplitSpec::SeededRandom {
            seed: 1,
            test_fraction: 1.0,
        };
        assert!(split_train_test(&corpus(3), &spec).is_err());
    }

    #[test]
    fn split_spec_serde_shape() {
        let spec: SplitSpec = serde_json::from_str(r#"{"mode":"seeded_random","seed":7,"test_fraction":0.2}"#).unwrap();
        assert_eq!(
            spec,
            SplitSpec::SeededRandom {
                seed: 7,
                test_fraction: 0.2
            }
        );
        assert!(serde_json::from_str::<SplitSpec>(r#"{"mode":"explicit_ids"}"#).is_err());
    }
}
