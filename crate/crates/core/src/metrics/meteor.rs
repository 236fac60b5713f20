//! METEOR without external resources.
//!
//! Unigrams are aligned in two stages: exact surface match, then a stem
//! stand-in that pairs tokens sharing a prefix of at least four characters.
//! The alignment maximizes exact matches, then stem matches, then minimizes
//! the number of chunks (runs contiguous in both hypothesis and reference).
//!
//! Segment score: `Fmean * (1 - 0.5 * (chunks / matches)^3)` with
//! `Fmean = 10PR / (R + 9P)`. The corpus value is the mean segment score.

use std::collections::HashMap;

use serde_json::Value;

use super::{
    base_params, check_pairs, prepare, tokenize, EvalOptions, MetricError, MetricKind, MetricScore, SegmentPair,
};

pub(crate) const STEM_PREFIX: usize = 4;
const FRAG_WEIGHT: f64 = 0.5;
const FRAG_EXPONENT: i32 = 3;
/// Memo entries allowed for the exact alignment search before falling back
/// to the greedy aligner.
const SEARCH_STATE_LIMIT: usize = 250_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct Alignment {
    pub exact: usize,
    pub stem: usize,
    pub chunks: usize,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.exact + self.stem
    }

    fn key(&self) -> (usize, usize, std::cmp::Reverse<usize>) {
        (self.exact, self.stem, std::cmp::Reverse(self.chunks))
    }

    fn better_than(&self, other: &Alignment) -> bool {
        self.key() > other.key()
    }
}

pub(crate) fn common_prefix_chars(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    slot: usize,
    ref_pos: usize,
    exact: bool,
}

struct Search {
    edges: Vec<Vec<Edge>>,
    memo: HashMap<(usize, u128, Option<usize>), Alignment>,
    aborted: bool,
}

impl Search {
    /// Best alignment of hypothesis positions `i..`, given the used reference
    /// slots and the reference position linked at `i - 1` (if any).
    fn best(&mut self, i: usize, used: u128, prev: Option<usize>) -> Alignment {
        if i == self.edges.len() || self.aborted {
            return Alignment::default();
        }
        // `prev` only matters when position i can continue the chunk.
        let prev = prev.filter(|&p| self.edges[i].iter().any(|e| e.ref_pos == p + 1));
        if let Some(found) = self.memo.get(&(i, used, prev)) {
            return *found;
        }
        if self.memo.len() >= SEARCH_STATE_LIMIT {
            self.aborted = true;
            return Alignment::default();
        }
        let mut best = self.best(i + 1, used, None);
        for k in 0..self.edges[i].len() {
            let edge = self.edges[i][k];
            if used & (1u128 << edge.slot) != 0 {
                continue;
            }
            let mut cand = self.best(i + 1, used | (1u128 << edge.slot), Some(edge.ref_pos));
            if edge.exact {
                cand.exact += 1;
            } else {
                cand.stem += 1;
            }
            if edge.ref_pos == 0 || prev != Some(edge.ref_pos - 1) {
                cand.chunks += 1;
            }
            if cand.better_than(&best) {
                best = cand;
            }
        }
        self.memo.insert((i, used, prev), best);
        best
    }
}

/// Left-to-right greedy alignment used when the exact search is too large.
fn greedy_align(hyp: &[String], reference: &[String]) -> Alignment {
    let mut link: Vec<Option<usize>> = vec![None; hyp.len()];
    let mut used = vec![false; reference.len()];
    let mut exact = 0;
    let mut stem = 0;
    for stage_exact in [true, false] {
        for i in 0..hyp.len() {
            if link[i].is_some() {
                continue;
            }
            let ok = |j: usize| {
                !used[j]
                    && if stage_exact {
                        hyp[i] == reference[j]
                    } else {
                        hyp[i] != reference[j] && common_prefix_chars(&hyp[i], &reference[j]) >= STEM_PREFIX
                    }
            };
            let continuing = i
                .checked_sub(1)
                .and_then(|p| link[p])
                .map(|j| j + 1)
                .filter(|&j| j < reference.len() && ok(j));
            if let Some(j) = continuing.or_else(|| (0..reference.len()).find(|&j| ok(j))) {
                link[i] = Some(j);
                used[j] = true;
                if stage_exact {
                    exact += 1;
                } else {
                    stem += 1;
                }
            }
        }
    }
    let mut chunks = 0;
    let mut last: Option<(usize, usize)> = None;
    for (i, j) in link.iter().enumerate().filter_map(|(i, l)| l.map(|j| (i, j))) {
        if last != Some((i.wrapping_sub(1), j.wrapping_sub(1))) {
            chunks += 1;
        }
        last = Some((i, j));
    }
    Alignment { exact, stem, chunks }
}

/// Returns the alignment and whether the greedy fallback was used.
pub(crate) fn align(hyp: &[String], reference: &[String]) -> (Alignment, bool) {
    let mut slots: HashMap<usize, usize> = HashMap::new();
    let mut edges = vec![Vec::new(); hyp.len()];
    for (i, h) in hyp.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            let exact = h == r;
            if exact || common_prefix_chars(h, r) >= STEM_PREFIX {
                let next = slots.len();
                let slot = *slots.entry(j).or_insert(next);
                edges[i].push(Edge {
                    slot,
                    ref_pos: j,
                    exact,
                });
            }
        }
    }
    if slots.len() > 128 {
        return (greedy_align(hyp, reference), true);
    }
    let mut search = Search {
        edges,
        memo: HashMap::new(),
        aborted: false,
    };
    let best = search.best(0, 0, None);
    if search.aborted {
        (greedy_align(hyp, reference), true)
    } else {
        (best, false)
    }
}

pub(crate) fn segment_score(alignment: Alignment, hyp_len: usize, ref_len: usize) -> f64 {
    let m = alignment.matches();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / hyp_len as f64;
    let r = m as f64 / ref_len as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = FRAG_WEIGHT * ((alignment.chunks as f64).powi(FRAG_EXPONENT) / (m as f64).powi(FRAG_EXPONENT));
    fmean * (1.0 - penalty)
}

fn score_pair(pair: &SegmentPair, options: EvalOptions) -> (f64, bool) {
    let hyp = tokenize(&prepare(&pair.hypothesis, options));
    let reference = tokenize(&prepare(&pair.reference, options));
    let (alignment, fallback) = align(&hyp, &reference);
    (segment_score(alignment, hyp.len(), reference.len()), fallback)
}

pub fn meteor_segment(pair: &SegmentPair, options: EvalOptions) -> f64 {
    score_pair(pair, options).0
}

pub fn meteor(pairs: &[SegmentPair], options: EvalOptions) -> Result<MetricScore, MetricError> {
    check_pairs(pairs)?;
    let mut fallbacks = 0;
    let per_segment: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let (s, fell_back) = score_pair(p, options);
            fallbacks += fell_back as usize;
            s
        })
        .collect();
    let corpus_value = per_segment.iter().sum::<f64>() / per_segment.len() as f64;
    let mut params = base_params(options);
    params.insert("variant".into(), Value::from("meteor-lite"));
    params.insert("stages".into(), Value::from(vec!["exact", "prefix>=4"]));
    params.insert("fmean".into(), Value::from("10PR/(R+9P)"));
    params.insert("penalty".into(), Value::from("0.5*(chunks/matches)^3"));
    params.insert("alignment".into(), Value::from("max exact, max stem, min chunks"));
    params.insert("alignment_fallbacks".into(), Value::from(fallbacks));
    Ok(MetricScore {
        metric: MetricKind::Meteor,
        corpus_value,
        per_segment: Some(per_segment),
        params,
    })
}
