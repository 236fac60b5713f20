//! Prompt templates with named placeholders, rendering and parse-back.
//!
//! Placeholders: `{src_lang}` and `{tgt_lang}` in the instruction, `{src}` and
//! `{tgt}` in the example block, `{src}` in the query block. Inserted text is
//! escaped so it never contains a raw newline or `→`; a template is accepted
//! only when every placeholder is followed by a literal carrying one of those
//! markers, which makes block boundaries recoverable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{language_name, Direction, FewShotPrompt, PromptError, LANGUAGES};

const ARROW: char = '→';
const ARROW_ESCAPE: &str = "\\u2192";

fn is_marker(c: char) -> bool {
    c == '\n' || c == ARROW
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            ARROW => out.push_str(ARROW_ESCAPE),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(text: &str) -> Option<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('\\') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        let (c, n) = if tail.starts_with("\\\\") {
            ('\\', 2)
        } else if tail.starts_with("\\n") {
            ('\n', 2)
        } else if tail.starts_with("\\r") {
            ('\r', 2)
        } else if tail.starts_with(ARROW_ESCAPE) {
            (ARROW, ARROW_ESCAPE.len())
        } else {
            return None;
        };
        out.push(c);
        rest = &tail[n..];
    }
    out.push_str(rest);
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    SrcLang,
    TgtLang,
    Src,
    Tgt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Lit(String),
    Hole(Slot),
}

fn compile(text: &str, allowed: &[Slot]) -> Result<Vec<Piece>, String> {
    let mut pieces = Vec::new();
    let mut lit = String::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        lit.push_str(&rest[..open]);
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| format!("unclosed placeholder in {text:?}"))?;
        let name = &rest[open + 1..open + close];
        let slot = match name {
            "src_lang" => Slot::SrcLang,
            "tgt_lang" => Slot::TgtLang,
            "src" => Slot::Src,
            "tgt" => Slot::Tgt,
            _ => return Err(format!("unknown placeholder {{{name}}}")),
        };
        if !allowed.contains(&slot) {
            return Err(format!("placeholder {{{name}}} not allowed here"));
        }
        if !lit.is_empty() {
            pieces.push(Piece::Lit(std::mem::take(&mut lit)));
        }
        pieces.push(Piece::Hole(slot));
        rest = &rest[open + close + 1..];
    }
    lit.push_str(rest);
    if !lit.is_empty() {
        pieces.push(Piece::Lit(lit));
    }
    Ok(pieces)
}

fn merge(a: &[Piece], b: &[Piece]) -> Vec<Piece> {
    let mut out: Vec<Piece> = a.to_vec();
    for p in b {
        match (out.last_mut(), p) {
            (Some(Piece::Lit(x)), Piece::Lit(y)) => x.push_str(y),
            _ => out.push(p.clone()),
        }
    }
    out
}

/// Matches `pieces` at the start of `s`. Holes cannot contain markers, so the
/// first marker after a hole belongs to the literal that follows it.
fn match_pieces(pieces: &[Piece], s: &str) -> Option<(Vec<(Slot, String)>, usize)> {
    let mut pos = 0;
    let mut holes = Vec::new();
    for (i, piece) in pieces.iter().enumerate() {
        let rest = &s[pos..];
        match piece {
            Piece::Lit(l) => {
                if !rest.starts_with(l.as_str()) {
                    return None;
                }
                pos += l.len();
            }
            Piece::Hole(slot) => {
                let end = match pieces.get(i + 1) {
                    Some(Piece::Lit(next)) => {
                        let m = next.find(is_marker)?;
                        let q = rest.find(is_marker)?;
                        let end = q.checked_sub(m)?;
                        if !rest.is_char_boundary(end) || !rest[end..].starts_with(next.as_str()) {
                            return None;
                        }
                        end
                    }
                    Some(Piece::Hole(_)) => return None,
                    None => rest.find(is_marker).unwrap_or(rest.len()),
                };
                holes.push((*slot, unescape(&rest[..end])?));
                pos += end;
            }
        }
    }
    Some((holes, pos))
}

fn fill(pieces: &[Piece], values: impl Fn(Slot) -> String) -> String {
    pieces
        .iter()
        .map(|p| match p {
            Piece::Lit(l) => l.clone(),
            Piece::Hole(s) => values(*s),
        })
        .collect()
}

/// A template as written in configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub instruction: String,
    pub example: String,
    pub query: String,
    #[serde(default = "default_separator")]
    pub separator: String,
    /// Send the instruction as a system message instead of inline text.
    #[serde(default)]
    pub system_role: bool,
    /// Completion cut point; defaults to the separator.
    #[serde(default)]
    pub stop: Option<String>,
}

fn default_separator() -> String {
    "\n".into()
}

/// A validated template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub spec: TemplateSpec,
    instruction: Vec<Piece>,
    example: Vec<Piece>,
    query: Vec<Piece>,
    separator: Vec<Piece>,
}

fn check_anchored(pieces: &[Piece], trailing_hole_ok: bool) -> Result<(), String> {
    for (i, p) in pieces.iter().enumerate() {
        if let Piece::Hole(_) = p {
            match pieces.get(i + 1) {
                Some(Piece::Lit(l)) if l.contains(is_marker) => {}
                None if trailing_hole_ok => {}
                _ => {
                    return Err("every placeholder must be followed by text containing a newline or '→'".into());
                }
            }
        }
    }
    Ok(())
}

fn count(pieces: &[Piece], slot: Slot) -> usize {
    pieces.iter().filter(|p| **p == Piece::Hole(slot)).count()
}

impl Template {
    pub fn new(id: &str, spec: TemplateSpec) -> Result<Self, PromptError> {
        let invalid = |m: String| PromptError::InvalidTemplate(id.to_string(), m);
        let instruction = compile(&spec.instruction, &[Slot::SrcLang, Slot::TgtLang]).map_err(invalid)?;
        let example = compile(&spec.example, &[Slot::Src, Slot::Tgt]).map_err(invalid)?;
        let query = compile(&spec.query, &[Slot::Src]).map_err(invalid)?;
        let separator = compile(&spec.separator, &[]).map_err(invalid)?;
        if !spec.separator.contains('\n') {
            return Err(invalid("separator must contain a newline".into()));
        }
        if count(&example, Slot::Src) != 1 || count(&example, Slot::Tgt) != 1 || count(&query, Slot::Src) != 1 {
            return Err(invalid(
                "example needs {src} and {tgt} once; query needs {src} once".into(),
            ));
        }
        check_anchored(&merge(&example, &separator), false).map_err(invalid)?;
        check_anchored(&query, true).map_err(invalid)?;
        let t = Template {
            id: id.to_string(),
            spec,
            instruction,
            example,
            query,
            separator,
        };
        t.probe()?;
        Ok(t)
    }

    /// Round-trips a few awkward prompts to reject templates whose example
    /// and query blocks could be confused.
    fn probe(&self) -> Result<(), PromptError> {
        let direction = Direction::new("fr", "mo").expect("static direction");
        let texts = ["a → b", "x\\ny", " ", "→", "c\nd"];
        for n in 0..3 {
            let prompt = FewShotPrompt {
                direction: direction.clone(),
                examples: (0..n)
                    .map(|i| (texts[i].to_string(), texts[i + 1].to_string()))
                    .collect(),
                query: texts[n + 2].to_string(),
                template_id: self.id.clone(),
            };
            if self.parse(&self.render(&prompt)).as_ref() != Ok(&prompt) {
                return Err(PromptError::InvalidTemplate(
                    self.id.clone(),
                    "rendered prompts do not parse back unambiguously".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn separator(&self) -> &str {
        &self.spec.separator
    }

    pub fn stop(&self) -> &str {
        self.spec.stop.as_deref().unwrap_or(&self.spec.separator)
    }

    pub fn system_role(&self) -> bool {
        self.spec.system_role
    }

    pub fn instruction_text(&self, direction: &Direction) -> String {
        fill(&self.instruction, |s| match s {
            Slot::SrcLang => language_name(direction.source.as_str()).to_string(),
            _ => language_name(direction.target.as_str()).to_string(),
        })
    }

    /// The prompt after the instruction: example blocks, then the query block.
    pub fn body_text(&self, prompt: &FewShotPrompt) -> String {
        let mut out = String::new();
        for (src, tgt) in &prompt.examples {
            out.push_str(&fill(&self.example, |s| match s {
                Slot::Src => escape(src),
                _ => escape(tgt),
            }));
            out.push_str(&self.spec.separator);
        }
        out.push_str(&fill(&self.query, |_| escape(&prompt.query)));
        out
    }

    pub fn render(&self, prompt: &FewShotPrompt) -> String {
        format!(
            "{}{}{}",
            self.instruction_text(&prompt.direction),
            self.spec.separator,
            self.body_text(prompt)
        )
    }

    /// Recovers direction, examples and query from rendered text.
    pub fn parse(&self, text: &str) -> Result<FewShotPrompt, PromptError> {
        for source in LANGUAGES {
            for target in LANGUAGES {
                let Ok(direction) = Direction::new(source, target) else {
                    continue;
                };
                let head = format!("{}{}", self.instruction_text(&direction), self.spec.separator);
                if let Some(body) = text.strip_prefix(&head) {
                    if let Some((examples, query)) = self.parse_body(body) {
                        return Ok(FewShotPrompt {
                            direction,
                            examples,
                            query,
                            template_id: self.id.clone(),
                        });
                    }
                }
            }
        }
        Err(PromptError::Parse(self.id.clone()))
    }

    #[allow(clippy::type_complexity)]
    fn parse_body(&self, body: &str) -> Option<(Vec<(String, String)>, String)> {
        let block = merge(&self.example, &self.separator);
        let mut examples = Vec::new();
        let mut pos = 0;
        loop {
            let rest = &body[pos..];
            if let Some((holes, used)) = match_pieces(&self.query, rest) {
                if used == rest.len() {
                    return Some((examples, holes.into_iter().next()?.1));
                }
            }
            let (holes, used) = match_pieces(&block, rest)?;
            if used == 0 {
                return None;
            }
            let get = |slot| holes.iter().find(|(s, _)| *s == slot).map(|(_, v)| v.clone());
            examples.push((get(Slot::Src)?, get(Slot::Tgt)?));
            pos += used;
        }
    }

    /// Extracts only the query text from a rendered prompt.
    pub fn parse_query(&self, text: &str) -> Result<String, PromptError> {
        self.parse(text).map(|p| p.query)
    }
}

pub const PLAIN_TEMPLATE: &str = "plain";
pub const CHAT_TEMPLATE: &str = "chat";

fn builtin(system_role: bool) -> TemplateSpec {
    TemplateSpec {
        instruction: "Translate from {src_lang} to {tgt_lang}.".into(),
        example: "{src} → {tgt}".into(),
        query: "{src} →".into(),
        separator: "\n".into(),
        system_role,
        stop: None,
    }
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Template>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let mut templates = BTreeMap::new();
        for (id, system) in [(PLAIN_TEMPLATE, false), (CHAT_TEMPLATE, true)] {
            templates.insert(
                id.to_string(),
                Template::new(id, builtin(system)).expect("builtin template"),
            );
        }
        TemplateRegistry { templates }
    }
}

impl TemplateRegistry {
    pub fn register(&mut self, id: &str, spec: TemplateSpec) -> Result<(), PromptError> {
        let t = Template::new(id, spec)?;
        self.templates.insert(id.to_string(), t);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Template, PromptError> {
        self.templates
            .get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(&self, prompt: &FewShotPrompt) -> Result<String, PromptError> {
        Ok(self.get(&prompt.template_id)?.render(prompt))
    }
}
