//! Deterministic text standardization for curated corpus releases.
//!
//! Rules are named and applied in the configured order. The default order is
//! `quotes`, `ellipsis`, `spacing`, `digits`, `final_period`, `whitespace`:
//!
//! | rule                 | effect                                                        |
//! |----------------------|---------------------------------------------------------------|
//! | `quotes`             | `« » “ ” „ ‟` become `"`; padding inside guillemets is dropped |
//! | `ellipsis`           | `?..`, `!...`, `...?` collapse to the bare `?` / `!`           |
//! | `spacing`            | exactly one space before a terminal `? ! ; :`                 |
//! | `digits`             | digit tokens become French words (French text only)           |
//! | `final_period`       | `.` appended when the text ends in a letter                   |
//! | `whitespace`         | whitespace runs become one space, ends trimmed                |
//! | `capitalize_initial` | first letter uppercased (registered, not in the default)      |
//!
//! Combining marks (such as U+030D in Monégasque orthography) are kept as-is.

mod numbers;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;

pub use numbers::{spell_number_fr, OutOfRange, MAX_SPELLED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Quotes,
    Ellipsis,
    Spacing,
    Digits,
    FinalPeriod,
    Whitespace,
    CapitalizeInitial,
}

impl Rule {
    pub const REGISTRY: [Rule; 7] = [
        Rule::Quotes,
        Rule::Ellipsis,
        Rule::Spacing,
        Rule::Digits,
        Rule::FinalPeriod,
        Rule::Whitespace,
        Rule::CapitalizeInitial,
    ];

    pub const DEFAULT_ORDER: [Rule; 6] = [
        Rule::Quotes,
        Rule::Ellipsis,
        Rule::Spacing,
        Rule::Digits,
        Rule::FinalPeriod,
        Rule::Whitespace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Quotes => "quotes",
            Rule::Ellipsis => "ellipsis",
            Rule::Spacing => "spacing",
            Rule::Digits => "digits",
            Rule::FinalPeriod => "final_period",
            Rule::Whitespace => "whitespace",
            Rule::CapitalizeInitial => "capitalize_initial",
        }
    }

    fn apply(self, text: &str, language: TextLanguage) -> String {
        match self {
            Rule::Quotes => normalize_quotes(text),
            Rule::Ellipsis => collapse_ellipsis(text),
            Rule::Spacing => french_spacing(text),
            Rule::Digits if language == TextLanguage::Fr => spell_digits(text),
            Rule::Digits => text.to_string(),
            Rule::FinalPeriod => final_period(text),
            Rule::Whitespace => text.split_whitespace().collect::<Vec<_>>().join(" "),
            Rule::CapitalizeInitial => capitalize_initial(text),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown standardization rule {0:?}")]
pub struct UnknownRule(pub String);

impl FromStr for Rule {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::REGISTRY
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| UnknownRule(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextLanguage {
    Fr,
    Mo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub enabled_rules: Vec<Rule>,
    pub language: TextLanguage,
}

impl RuleConfig {
    pub fn default_for(language: TextLanguage) -> Self {
        RuleConfig {
            enabled_rules: Rule::DEFAULT_ORDER.to_vec(),
            language,
        }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S], language: TextLanguage) -> Result<Self, UnknownRule> {
        let enabled_rules = names.iter().map(|n| n.as_ref().parse()).collect::<Result<_, _>>()?;
        Ok(RuleConfig {
            enabled_rules,
            language,
        })
    }
}

pub fn standardize_text(text: &str, config: &RuleConfig) -> String {
    config
        .enabled_rules
        .iter()
        .fold(text.to_string(), |acc, rule| rule.apply(&acc, config.language))
}

fn is_hspace(c: char) -> bool {
    c.is_whitespace()
}

fn normalize_quotes(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '«' | '“' | '„' | '‟' => {
                out.push('"');
                while chars.peek().is_some_and(|&n| is_hspace(n)) {
                    chars.next();
                }
            }
            '»' | '”' => {
                let kept = out.trim_end_matches(is_hspace).len();
                out.truncate(kept);
                out.push('"');
            }
            _ => out.push(c),
        }
    }
    out
}

fn is_terminal_mark(c: char) -> bool {
    matches!(c, '?' | '!')
}

fn is_dot(c: char) -> bool {
    matches!(c, '.' | '…')
}

/// Runs mixing `?`/`!` with dots keep only their `?`/`!` characters.
fn collapse_ellipsis(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !(is_terminal_mark(c) || is_dot(c)) {
            out.push(c);
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && (is_terminal_mark(chars[i]) || is_dot(chars[i])) {
            i += 1;
        }
        let run = &chars[start..i];
        let has_mark = run.iter().any(|&c| is_terminal_mark(c));
        let has_dot = run.iter().any(|&c| is_dot(c));
        if has_mark && has_dot {
            out.extend(run.iter().filter(|&&c| is_terminal_mark(c)));
        } else {
            out.extend(run);
        }
    }
    out
}

fn is_spaced_mark(c: char) -> bool {
    matches!(c, '?' | '!' | ';' | ':')
}

/// A mark is treated as sentence punctuation only when what follows it is not
/// part of a word (so `10:30` and `http://` are left alone).
fn closes_clause(next: Option<char>) -> bool {
    match next {
        None => true,
        Some(c) => {
            c.is_whitespace()
                || is_spaced_mark(c)
                || matches!(c, '"' | '»' | '”' | ')' | ']' | '.' | ',' | '…' | '\'' | '’')
        }
    }
}

fn french_spacing(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 8);
    for (i, &c) in chars.iter().enumerate() {
        if is_spaced_mark(c) && closes_clause(chars.get(i + 1).copied()) {
            let trimmed = out.trim_end_matches(is_hspace).len();
            let had_space = trimmed < out.len();
            out.truncate(trimmed);
            match out.chars().last() {
                None => {}
                Some(prev) if is_spaced_mark(prev) && !had_space => {}
                Some(_) => out.push(' '),
            }
        }
        out.push(c);
    }
    out
}

fn is_group_space(c: char) -> bool {
    matches!(c, ' ' | '\u{a0}' | '\u{202f}')
}

/// Replaces standalone digit tokens (optionally grouped by thousands, as in
/// `12 500`) with French words. Decimals, times, codes glued to letters,
/// leading-zero tokens and values over 999 999 are left untouched.
fn spell_digits(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 16);
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_digit() {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        let mut digits: String = chars[start..i].iter().collect();
        if digits.len() <= 3 {
            while i + 4 <= chars.len()
                && is_group_space(chars[i])
                && chars[i + 1..i + 4].iter().all(|c| c.is_ascii_digit())
                && !chars.get(i + 4).is_some_and(|c| c.is_ascii_digit())
            {
                digits.extend(&chars[i + 1..i + 4]);
                i += 4;
            }
        }
        let before = start.checked_sub(1).map(|j| chars[j]);
        let before2 = start.checked_sub(2).map(|j| chars[j]);
        let after = chars.get(i).copied();
        let after2 = chars.get(i + 1).copied();
        let glued = before.is_some_and(char::is_alphanumeric) || after.is_some_and(char::is_alphanumeric);
        let numeric_sep = |c: Option<char>| c.is_some_and(|c| matches!(c, '.' | ',' | ':'));
        let is_digit = |c: Option<char>| c.is_some_and(|c| c.is_ascii_digit());
        let decimal = (numeric_sep(before) && is_digit(before2)) || (numeric_sep(after) && is_digit(after2));
        let leading_zero = digits.len() > 1 && digits.starts_with('0');
        let words = match (glued || decimal || leading_zero, digits.parse::<u64>()) {
            (false, Ok(n)) => spell_number_fr(n).ok(),
            _ => None,
        };
        match words {
            Some(w) => out.push_str(&w),
            None => out.extend(&chars[start..i]),
        }
    }
    out
}

fn is_combining(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

fn is_lettery(c: char) -> bool {
    c.is_alphabetic() || is_combining(c)
}

fn final_period(text: &str) -> String {
    let body = text.trim_end_matches(is_hspace);
    let mut rev = body.chars().rev();
    let needs = match (rev.next(), rev.next()) {
        (Some(last), _) if is_lettery(last) => true,
        (Some('"' | ')'), Some(prev)) => is_lettery(prev),
        _ => false,
    };
    if !needs {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len() + 1);
    out.push_str(body);
    out.push('.');
    out.push_str(&text[body.len()..]);
    out
}

fn capitalize_initial(text: &str) -> String {
    match text.char_indices().find(|(_, c)| c.is_alphabetic()) {
        Some((i, c)) if c.is_lowercase() => {
            let mut out = String::with_capacity(text.len() + 2);
            out.push_str(&text[..i]);
            out.extend(c.to_uppercase());
            out.push_str(&text[i + c.len_utf8()..]);
            out
        }
        _ => text.to_string(),
    }
}

/// Before/after excerpt for one changed pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDiff {
    pub id: String,
    pub fr: Option<(String, String)>,
    pub partner: Option<(String, String)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardizationReport {
    pub pairs_processed: usize,
    pub pairs_changed: usize,
    /// How many text fields each rule modified.
    pub rule_hits: BTreeMap<String, usize>,
    pub diffs: Vec<PairDiff>,
}

impl StandardizationReport {
    /// Merges another report that covers later pairs.
    pub fn merge(&mut self, other: StandardizationReport) {
        self.pairs_processed += other.pairs_processed;
        self.pairs_changed += other.pairs_changed;
        for (rule, n) in other.rule_hits {
            *self.rule_hits.entry(rule).or_default() += n;
        }
        self.diffs.extend(other.diffs);
    }

    /// Human-readable per-rule counts followed by before/after diffs.
    pub fn render(&self) -> String {
        let mut out = format!(
            "pairs processed: {}\npairs changed: {}\n\nrule hits:\n",
            self.pairs_processed, self.pairs_changed
        );
        for (rule, n) in &self.rule_hits {
            out.push_str(&format!("  {rule:<20} {n}\n"));
        }
        for d in &self.diffs {
            out.push_str(&format!("\n@@ {} @@\n", d.id));
            for (before, after) in d.fr.iter().chain(d.partner.iter()) {
                out.push_str(&format!("-{before}\n+{after}\n"));
            }
        }
        out
    }
}

fn standardize_tracked(text: &str, config: &RuleConfig, hits: &mut BTreeMap<String, usize>) -> String {
    let mut current = text.to_string();
    for rule in &config.enabled_rules {
        let next = rule.apply(&current, config.language);
        if next != current {
            *hits.entry(rule.name().to_string()).or_default() += 1;
        }
        current = next;
    }
    current
}

/// Standardizes every pair: French text with `config_fr`, the partner side
/// with `config_partner`. Ids, kinds, sources and order are unchanged.
pub fn standardize_corpus(
    corpus: &Corpus,
    config_fr: &RuleConfig,
    config_partner: &RuleConfig,
) -> (Corpus, StandardizationReport) {
    let mut report = StandardizationReport {
        rule_hits: Rule::REGISTRY
            .iter()
            .filter(|r| config_fr.enabled_rules.contains(r) || config_partner.enabled_rules.contains(r))
            .map(|r| (r.name().to_string(), 0))
            .collect(),
        ..Default::default()
    };
    let mut pairs = Vec::with_capacity(corpus.len());
    for pair in corpus.pairs() {
        let fr = standardize_tracked(&pair.fr, config_fr, &mut report.rule_hits);
        let partner = standardize_tracked(&pair.partner, config_partner, &mut report.rule_hits);
        report.pairs_processed += 1;
        let fr_diff = (fr != pair.fr).then(|| (pair.fr.clone(), fr.clone()));
        let partner_diff = (partner != pair.partner).then(|| (pair.partner.clone(), partner.clone()));
        if fr_diff.is_some() || partner_diff.is_some() {
            report.pairs_changed += 1;
            report.diffs.push(PairDiff {
                id: pair.id.clone(),
                fr: fr_diff,
                partner: partner_diff,
            });
        }
        let mut next = pair.clone();
        next.fr = fr;
        next.partner = partner;
        pairs.push(next);
    }
    let corpus =
        Corpus::new(pairs, corpus.lang_pair().clone()).expect("standardization keeps ids unique and text non-empty");
    (corpus, report)
}
