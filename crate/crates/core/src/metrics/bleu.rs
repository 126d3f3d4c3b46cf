//! BLEU over space-separated tokens: add-k-smoothed sentence-level scores
//! and unsmoothed corpus-level scores with pooled counts.
//!
//! Scores operate on the pipeline's own tokenization; no detokenizer or
//! external tokenizer is applied, so absolute values are comparable only
//! within this crate.

use std::collections::HashMap;

pub const MAX_N: usize = 4;

/// Clipped n-gram match and total counts for one hypothesis/reference pair.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BleuCounts {
    pub matches: [u64; MAX_N],
    pub totals: [u64; MAX_N],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuCounts {
    pub fn add(&mut self, other: &BleuCounts) {
        for n in 0..MAX_N {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], u64> {
    let mut map: HashMap<&[&str], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *map.entry(window).or_insert(0) += 1;
        }
    }
    map
}

/// Modified (clipped) n-gram counts for orders 1..=4.
pub fn segment_counts(hyp: &[&str], reference: &[&str]) -> BleuCounts {
    let mut counts = BleuCounts {
        hyp_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_N {
        let hyp_grams = ngram_counts(hyp, n);
        let ref_grams = ngram_counts(reference, n);
        let mut matched = 0u64;
        for (gram, &c) in &hyp_grams {
            if let Some(&r) = ref_grams.get(gram) {
                matched += c.min(r);
            }
        }
        counts.matches[n - 1] = matched;
        counts.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
    }
    counts
}

fn brevity_penalty(hyp_len: u64, ref_len: u64) -> f64 {
    if hyp_len >= ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// Sentence-level BLEU: geometric mean of add-k-smoothed modified n-gram
/// precisions for n = 1..=4, times the brevity penalty. An empty
/// hypothesis scores 0.
pub fn sentence_bleu(hyp: &[&str], reference: &[&str], add_k: f64) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let counts = segment_counts(hyp, reference);
    let mut log_sum = 0.0f64;
    for n in 0..MAX_N {
        let p = (counts.matches[n] as f64 + add_k) / (counts.totals[n] as f64 + add_k);
        log_sum += p.ln();
    }
    brevity_penalty(counts.hyp_len, counts.ref_len) * (log_sum / MAX_N as f64).exp()
}

/// Corpus-level BLEU with counts pooled over aligned segments and no
/// smoothing: a pooled zero at any order zeroes the whole score.
pub fn corpus_bleu<H, R>(hyps: &[H], refs: &[R]) -> f64
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    assert_eq!(hyps.len(), refs.len(), "corpus_bleu needs aligned segments");
    let mut pooled = BleuCounts::default();
    for (h, r) in hyps.iter().zip(refs.iter()) {
        let h_toks: Vec<&str> = h.as_ref().split_whitespace().collect();
        let r_toks: Vec<&str> = r.as_ref().split_whitespace().collect();
        pooled.add(&segment_counts(&h_toks, &r_toks));
    }
    if pooled.hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0f64;
    for n in 0..MAX_N {
        if pooled.matches[n] == 0 || pooled.totals[n] == 0 {
            return 0.0;
        }
        log_sum += (pooled.matches[n] as f64 / pooled.totals[n] as f64).ln();
    }
    brevity_penalty(pooled.hyp_len, pooled.ref_len) * (log_sum / MAX_N as f64).exp()
}

/// Sentence BLEU over whitespace-tokenized strings.
pub fn sentence_bleu_str(hyp: &str, reference: &str, add_k: f64) -> f64 {
    let h: Vec<&str> = hyp.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    sentence_bleu(&h, &r, add_k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sentences_score_one() {
        let s = ["a", "b", "c", "d", "e"];
        assert_eq!(sentence_bleu(&s, &s, 1.0), 1.0);
    }

    #[test]
    fn zero_fourgram_overlap_stays_positive() {
        // shares unigrams/bigrams but no 4-gram
        let hyp = ["a", "b", "x", "c", "d"];
        let reference = ["a", "b", "y", "c", "d"];
        let score = sentence_bleu(&hyp, &reference, 1.0);
        assert!(score > 0.0);
        assert!(score < 1.0);
    }

    #[test]
    fn one_substitution_golden_value() {
        // hyp "a b c d e" vs ref "a b x d e"
        // hand counts: p1 = (4+1)/(5+1), p2 = (2+1)/(4+1),
        //              p3 = (0+1)/(3+1), p4 = (0+1)/(2+1), BP = 1
        let hyp = ["a", "b", "c", "d", "e"];
        let reference = ["a", "b", "x", "d", "e"];
        let golden = (5.0f64 / 6.0 * 3.0 / 5.0 * 0.25 * (1.0 / 3.0)).powf(0.25);
        assert!((sentence_bleu(&hyp, &reference, 1.0) - golden).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_scores_zero() {
        assert_eq!(sentence_bleu(&[], &["a", "b"], 1.0), 0.0);
    }

    #[test]
    fn brevity_penalty_applies_to_short_hypotheses() {
        // identical content, hypothesis truncated: precisions all 1 after
        // smoothing cancels, so score == BP == exp(1 - 5/4)
        let hyp = ["a", "b", "c", "d"];
        let reference = ["a", "b", "c", "d", "e"];
        let score = sentence_bleu(&hyp, &reference, 1.0);
        let bp = (1.0f64 - 5.0 / 4.0).exp();
        assert!((score - bp).abs() < 1e-12);
    }

    #[test]
    fn corpus_identity_scores_one() {
        let refs = ["a b c d", "e f g h i"];
        assert_eq!(corpus_bleu(&refs, &refs), 1.0);
    }

    #[test]
    fn corpus_pooled_zero_order_zeroes_the_score() {
        // no 4-gram matches anywhere
        let hyps = ["a b x d", "e f y h"];
        let refs = ["a b c d", "e f g h"];
        assert_eq!(corpus_bleu(&hyps, &refs), 0.0);
    }

    #[test]
    fn three_sentence_golden_value() {
        // pooled hand counts:
        //   s1 hyp=ref "a b c d"; s2 hyp=ref "a b"; s3 "x y z w" vs "x q z w"
        //   p1 = 9/10, p2 = 5/7, p3 = 2/4, p4 = 1/2, BP = 1
        let hyps = ["a b c d", "a b", "x y z w"];
        let refs = ["a b c d", "a b", "x q z w"];
        let golden = (9.0f64 / 10.0 * 5.0 / 7.0 * 0.5 * 0.5).powf(0.25);
        assert!((corpus_bleu(&hyps, &refs) - golden).abs() < 1e-12);
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let cases = [
            ("a", "a"),
            ("a b a b a", "b a b"),
            ("q w e r t y", "a s d f g h"),
        ];
        for (h, r) in cases {
            let s = sentence_bleu_str(h, r, 1.0);
            assert!((0.0..=1.0).contains(&s), "{s} out of range");
            let c = corpus_bleu(&[h], &[r]);
            assert!((0.0..=1.0).contains(&c), "{c} out of range");
        }
    }
}
