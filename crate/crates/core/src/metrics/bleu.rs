use serde_json::Value;

use super::{
    base_params, check_pairs, clipped_matches, ngram_counts, prepare, tokenize, EvalOptions, MetricError, MetricKind,
    MetricScore, SegmentPair,
};

const MAX_ORDER: usize = 4;

/// Sufficient statistics for BLEU over one or more segments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct BleuStats {
    matches: [usize; MAX_ORDER],
    hyp_ngrams: [usize; MAX_ORDER],
    ref_ngrams: [usize; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
}

impl BleuStats {
    fn of(pair: &SegmentPair, options: EvalOptions) -> Self {
        let hyp = tokenize(&prepare(&pair.hypothesis, options));
        let reference = tokenize(&prepare(&pair.reference, options));
        let mut stats = BleuStats {
            hyp_len: hyp.len(),
            ref_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let h = ngram_counts(&hyp, n);
            let r = ngram_counts(&reference, n);
            stats.matches[n - 1] = clipped_matches(&h, &r);
            stats.hyp_ngrams[n - 1] = hyp.len().saturating_sub(n - 1);
            stats.ref_ngrams[n - 1] = reference.len().saturating_sub(n - 1);
        }
        stats
    }

    fn add(&mut self, other: &BleuStats) {
        for i in 0..MAX_ORDER {
            self.matches[i] += other.matches[i];
            self.hyp_ngrams[i] += other.hyp_ngrams[i];
            self.ref_ngrams[i] += other.ref_ngrams[i];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    fn brevity_penalty(&self) -> f64 {
        if self.hyp_len > self.ref_len {
            1.0
        } else if self.hyp_len == 0 {
            0.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// Unsmoothed BLEU. Orders for which neither side has any n-gram (both
    /// sides shorter than n) are left out of the geometric mean.
    fn score(&self) -> f64 {
        let mut log_sum = 0.0;
        let mut orders = 0;
        for i in 0..MAX_ORDER {
            if self.hyp_ngrams[i] == 0 && self.ref_ngrams[i] == 0 {
                continue;
            }
            if self.matches[i] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[i] as f64 / self.hyp_ngrams[i] as f64).ln();
            orders += 1;
        }
        if orders == 0 {
            return 0.0;
        }
        100.0 * self.brevity_penalty() * (log_sum / orders as f64).exp()
    }

    /// Add-one smoothing on orders above 1.
    fn smoothed_score(&self) -> f64 {
        if self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_sum = (self.matches[0] as f64 / self.hyp_ngrams[0] as f64).ln();
        for i in 1..MAX_ORDER {
            log_sum += ((self.matches[i] + 1) as f64 / (self.hyp_ngrams[i] + 1) as f64).ln();
        }
        100.0 * self.brevity_penalty() * (log_sum / MAX_ORDER as f64).exp()
    }
}

/// Corpus BLEU with pooled clipped n-gram counts (orders 1-4), no smoothing.
/// `per_segment` carries the smoothed sentence-level scores.
pub fn bleu_corpus(pairs: &[SegmentPair], options: EvalOptions) -> Result<MetricScore, MetricError> {
    check_pairs(pairs)?;
    let mut total = BleuStats::default();
    let mut per_segment = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let stats = BleuStats::of(pair, options);
        per_segment.push(stats.smoothed_score());
        total.add(&stats);
    }
    let mut params = base_params(options);
    params.insert("max_order".into(), Value::from(MAX_ORDER));
    params.insert("smoothing".into(), Value::from("none"));
    params.insert("segment_smoothing".into(), Value::from("add-one above unigrams"));
    params.insert("brevity_penalty".into(), Value::from("corpus"));
    params.insert(
        "empty_orders".into(),
        Value::from("skipped when both sides lack n-grams"),
    );
    Ok(MetricScore {
        metric: MetricKind::Bleu,
        corpus_value: total.score(),
        per_segment: Some(per_segment),
        params,
    })
}

/// Sentence BLEU with add-one smoothing on orders 2-4.
pub fn bleu_sentence(pair: &SegmentPair, options: EvalOptions) -> f64 {
    BleuStats::of(pair, options).smoothed_score()
}
