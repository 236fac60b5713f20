use serde_json::Value;

use super::{
    base_params, check_pairs, clipped_matches, ngram_counts, prepare, tokenize, EvalOptions, MetricError, MetricKind,
    MetricScore, SegmentPair,
};

const CHAR_ORDER: usize = 6;
const WORD_ORDER: usize = 2;
const BETA: f64 = 2.0;
const ORDERS: usize = CHAR_ORDER + WORD_ORDER;

/// Per-order (matches, hypothesis n-grams, reference n-grams); character
/// orders first, then word orders.
#[derive(Debug, Clone, Copy, Default)]
struct ChrfStats([(usize, usize, usize); ORDERS]);

impl ChrfStats {
    fn of(pair: &SegmentPair, options: EvalOptions) -> Self {
        let hyp = prepare(&pair.hypothesis, options);
        let reference = prepare(&pair.reference, options);
        let hyp_chars: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
        let ref_chars: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
        let hyp_words = tokenize(&hyp);
        let ref_words = tokenize(&reference);

        let mut stats = ChrfStats::default();
        for n in 1..=CHAR_ORDER {
            let m = clipped_matches(&ngram_counts(&hyp_chars, n), &ngram_counts(&ref_chars, n));
            stats.0[n - 1] = (
                m,
                hyp_chars.len().saturating_sub(n - 1),
                ref_chars.len().saturating_sub(n - 1),
            );
        }
        for n in 1..=WORD_ORDER {
            let m = clipped_matches(&ngram_counts(&hyp_words, n), &ngram_counts(&ref_words, n));
            stats.0[CHAR_ORDER + n - 1] = (
                m,
                hyp_words.len().saturating_sub(n - 1),
                ref_words.len().saturating_sub(n - 1),
            );
        }
        stats
    }

    fn add(&mut self, other: &ChrfStats) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        }
    }

    /// Mean F-beta over orders, skipping orders where neither side has n-grams.
    fn score(&self) -> f64 {
        let beta2 = BETA * BETA;
        let mut sum = 0.0;
        let mut orders = 0;
        for &(m, h, r) in &self.0 {
            if h == 0 && r == 0 {
                continue;
            }
            orders += 1;
            let p = if h > 0 { m as f64 / h as f64 } else { 0.0 };
            let rec = if r > 0 { m as f64 / r as f64 } else { 0.0 };
            if p + rec > 0.0 {
                sum += (1.0 + beta2) * p * rec / (beta2 * p + rec);
            }
        }
        if orders == 0 {
            0.0
        } else {
            100.0 * sum / orders as f64
        }
    }
}

/// Corpus chrF++: character 1-6 grams on whitespace-stripped text plus word
/// 1-2 grams, beta = 2, counts pooled over the corpus.
pub fn chrf_pp(pairs: &[SegmentPair], options: EvalOptions) -> Result<MetricScore, MetricError> {
    check_pairs(pairs)?;
    let mut total = ChrfStats::default();
    let mut per_segment = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let stats = ChrfStats::of(pair, options);
        per_segment.push(stats.score());
        total.add(&stats);
    }
    let mut params = base_params(options);
    params.insert("char_order".into(), Value::from(CHAR_ORDER));
    params.insert("word_order".into(), Value::from(WORD_ORDER));
    params.insert("beta".into(), Value::from(BETA));
    params.insert("char_whitespace".into(), Value::from("stripped"));
    params.insert(
        "empty_orders".into(),
        Value::from("skipped when both sides lack n-grams"),
    );
    Ok(MetricScore {
        metric: MetricKind::ChrfPp,
        corpus_value: total.score(),
        per_segment: Some(per_segment),
        params,
    })
}

pub fn chrf_pp_sentence(pair: &SegmentPair, options: EvalOptions) -> f64 {
    ChrfStats::of(pair, options).score()
}
