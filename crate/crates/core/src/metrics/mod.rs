//! Evaluation measures over N-best candidate lists: oracle and median BLEU
//! selection, rank-slice discrepancy, diversity-per-quality, distinct
//! n-gram ratios, forced-decoding likelihood gaps, and aggregated fluency
//! over a pluggable scorer.
//!
//! All metrics here live in [0, 1] where they are BLEU-derived; report
//! layers may scale to the conventional 0-100 range.

mod bleu;

pub use bleu::{corpus_bleu, segment_counts, sentence_bleu, sentence_bleu_str, BleuCounts, MAX_N};

use std::collections::HashSet;

use crate::error::{Error, Result};

pub const SENTENCE_BLEU_ADD_K: f64 = 1.0;

/// Aligned sources, references, and per-source candidate lists for one
/// system.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBundle {
    pub sources: Vec<String>,
    pub references: Vec<String>,
    /// `candidates[i]` holds the ranked hypotheses for `sources[i]`.
    pub candidates: Vec<Vec<String>>,
}

impl EvalBundle {
    pub fn new(
        sources: Vec<String>,
        references: Vec<String>,
        candidates: Vec<Vec<String>>,
    ) -> Result<Self> {
        if sources.len() != references.len() || sources.len() != candidates.len() {
            return Err(Error::invalid(format!(
                "misaligned bundle: {} sources, {} references, {} candidate lists",
                sources.len(),
                references.len(),
                candidates.len()
            )));
        }
        if sources.is_empty() {
            return Err(Error::invalid("empty bundle"));
        }
        Ok(EvalBundle {
            sources,
            references,
            candidates,
        })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Width of the rectangular candidate matrix; errors when ragged.
    pub fn rectangular_width(&self) -> Result<usize> {
        let n = self.candidates[0].len();
        for (i, list) in self.candidates.iter().enumerate() {
            if list.len() != n {
                return Err(Error::invalid(format!(
                    "ragged candidate lists: source 0 has {n}, source {i} has {}",
                    list.len()
                )));
            }
        }
        Ok(n)
    }
}

/// Per-source oracle pick: the hypothesis among the first `n_select`
/// maximizing sentence BLEU against the reference, ties to the lowest rank.
fn oracle_pick<'a>(list: &'a [String], reference: &str, n_select: usize) -> &'a str {
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (rank, hyp) in list.iter().take(n_select).enumerate() {
        let score = sentence_bleu_str(hyp, reference, SENTENCE_BLEU_ADD_K);
        if score > best_score {
            best_score = score;
            best = rank;
        }
    }
    &list[best]
}

/// Oracle BLEU: corpus BLEU of the per-source best-of-`n_select` picks.
pub fn bleu_at_n(bundle: &EvalBundle, n_select: usize) -> Result<f64> {
    if n_select == 0 {
        return Err(Error::invalid("n_select must be >= 1"));
    }
    let mut picks = Vec::with_capacity(bundle.len());
    for (i, list) in bundle.candidates.iter().enumerate() {
        if list.len() < n_select {
            return Err(Error::invalid(format!(
                "source {i} has only {} candidates, need {n_select}",
                list.len()
            )));
        }
        picks.push(oracle_pick(list, &bundle.references[i], n_select));
    }
    Ok(corpus_bleu(&picks, &bundle.references))
}

/// Median-BLEU selection: per source, the candidate with the median
/// sentence BLEU; for even `n_select` the higher-scoring of the two middle
/// candidates (ties to the lower rank).
pub fn med_bleu_at_n(bundle: &EvalBundle, n_select: usize) -> Result<f64> {
    if n_select == 0 {
        return Err(Error::invalid("n_select must be >= 1"));
    }
    let mut picks: Vec<&str> = Vec::with_capacity(bundle.len());
    for (i, list) in bundle.candidates.iter().enumerate() {
        if list.len() < n_select {
            return Err(Error::invalid(format!(
                "source {i} has only {} candidates, need {n_select}",
                list.len()
            )));
        }
        let mut scored: Vec<(f64, usize)> = list
            .iter()
            .take(n_select)
            .enumerate()
            .map(|(rank, hyp)| {
                (
                    sentence_bleu_str(hyp, &bundle.references[i], SENTENCE_BLEU_ADD_K),
                    rank,
                )
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let pick_rank = if n_select % 2 == 1 {
            scored[n_select / 2].1
        } else {
            let lo = scored[n_select / 2 - 1];
            let hi = scored[n_select / 2];
            if hi.0 > lo.0 {
                hi.1
            } else {
                lo.1
            }
        };
        picks.push(&list[pick_rank]);
    }
    Ok(corpus_bleu(&picks, &bundle.references))
}

/// Oracle BLEU over the per-source concatenation of two systems' lists.
pub fn merged_bleu(a: &EvalBundle, b: &EvalBundle) -> Result<f64> {
    if a.sources != b.sources || a.references != b.references {
        return Err(Error::invalid(
            "merged systems must share sources and references",
        ));
    }
    let width_a = a.rectangular_width()?;
    let width_b = b.rectangular_width()?;
    let candidates: Vec<Vec<String>> = a
        .candidates
        .iter()
        .zip(b.candidates.iter())
        .map(|(la, lb)| la.iter().chain(lb.iter()).cloned().collect())
        .collect();
    let merged = EvalBundle::new(a.sources.clone(), a.references.clone(), candidates)?;
    bleu_at_n(&merged, width_a + width_b)
}

/// Mean corpus BLEU across candidate ranks: the average quality of the
/// whole list, not just its best member.
pub fn ref_bleu(bundle: &EvalBundle) -> Result<f64> {
    let width = bundle.rectangular_width()?;
    if width == 0 {
        return Err(Error::invalid("empty candidate lists"));
    }
    let mut total = 0.0f64;
    for rank in 0..width {
        let slice: Vec<&str> = bundle
            .candidates
            .iter()
            .map(|list| list[rank].as_str())
            .collect();
        total += corpus_bleu(&slice, &bundle.references);
    }
    Ok(total / width as f64)
}

/// Rank-slice discrepancy: mean over ordered pairs of rank slices of
/// `1 - corpus_bleu(slice, slice')`. Higher means more diverse lists.
pub fn dp(bundle: &EvalBundle) -> Result<f64> {
    let width = bundle.rectangular_width()?;
    if width < 2 {
        return Err(Error::invalid("dp needs at least 2 candidates per source"));
    }
    let slices: Vec<Vec<&str>> = (0..width)
        .map(|rank| {
            bundle
                .candidates
                .iter()
                .map(|list| list[rank].as_str())
                .collect()
        })
        .collect();
    let mut total = 0.0f64;
    for r in 0..width {
        for s in 0..width {
            if r != s {
                total += 1.0 - corpus_bleu(&slices[r], &slices[s]);
            }
        }
    }
    Ok(total / (width * (width - 1)) as f64)
}

/// Diversity enhancement per quality, relative to a base system:
/// `-(dp_base - dp_sys) / (refbleu_base - refbleu_sys)`. `None` when the
/// quality denominator vanishes.
pub fn deq(dp_sys: f64, dp_base: f64, refbleu_sys: f64, refbleu_base: f64) -> Option<f64> {
    let denom = refbleu_base - refbleu_sys;
    if denom == 0.0 {
        return None;
    }
    Some(-(dp_base - dp_sys) / denom)
}

/// Ratio of distinct to total n-grams, pooled over every candidate of
/// every source.
pub fn distinct_ngram_ratio(candidates: &[Vec<String>], n: usize) -> Result<f64> {
    if !(1..=MAX_N).contains(&n) {
        return Err(Error::invalid("n must be in 1..=4"));
    }
    let mut distinct: HashSet<Vec<&str>> = HashSet::new();
    let mut total = 0u64;
    for list in candidates {
        for hyp in list {
            let tokens: Vec<&str> = hyp.split_whitespace().collect();
            if tokens.len() >= n {
                for window in tokens.windows(n) {
                    distinct.insert(window.to_vec());
                    total += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::invalid(format!(
            "no {n}-grams: every sentence is shorter than {n}"
        )));
    }
    Ok(distinct.len() as f64 / total as f64)
}

/// Result of [`madll`]: the mean absolute log-likelihood difference over
/// sentence pairs where both sides are finite, and how many pairs were
/// excluded for a non-finite side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadllResult {
    pub value: f64,
    pub skipped: usize,
}

/// Mean absolute difference of per-sentence log-likelihoods of two
/// reference translations. Lower values mean the model scores the two
/// valid references more evenly.
pub fn madll(logliks_a: &[f64], logliks_b: &[f64]) -> Result<MadllResult> {
    if logliks_a.len() != logliks_b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            logliks_a.len(),
            logliks_b.len()
        )));
    }
    let mut total = 0.0f64;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (&a, &b) in logliks_a.iter().zip(logliks_b.iter()) {
        if a.is_finite() && b.is_finite() {
            total += (a - b).abs();
            used += 1;
        } else {
            skipped += 1;
        }
    }
    if used == 0 {
        return Err(Error::invalid("no finite log-likelihood pairs"));
    }
    Ok(MadllResult {
        value: total / used as f64,
        skipped,
    })
}

/// Fluency scorer over one sentence; a pseudo-log-likelihood stand-in.
/// Implementations must be deterministic for a fixed sentence.
pub trait FluencyScorer {
    fn score(&self, sentence: &str) -> f64;
}

impl<F: Fn(&str) -> f64> FluencyScorer for F {
    fn score(&self, sentence: &str) -> f64 {
        self(sentence)
    }
}

/// Deterministic mock scorer: a seeded hash of adjacent token pairs mapped
/// to a negative per-token "surprisal". Useful when no external fluency
/// scores are available.
#[derive(Debug, Clone, Copy)]
pub struct MockFluency {
    pub seed: u64,
}

impl FluencyScorer for MockFluency {
    fn score(&self, sentence: &str) -> f64 {
        let mut prev = "<s>";
        let mut total = 0.0f64;
        for tok in sentence.split_whitespace() {
            let mut h = self.seed ^ 0x1234_5678_9abc_def0;
            for b in prev.bytes().chain([0u8]).chain(tok.bytes()) {
                h = h.wrapping_mul(0x100_0000_01b3) ^ b as u64;
            }
            // in [-3.5, -0.5), a plausible per-token log-probability range
            total -= 0.5 + 3.0 * ((h >> 11) as f64 / (1u64 << 53) as f64);
            prev = tok;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpllStat {
    Max,
    Min,
    Mean,
}

/// Result of [`spll`]: the aggregated value plus how many empty candidates
/// were skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpllResult {
    pub value: f64,
    pub skipped: usize,
}

/// Aggregated length-normalized fluency: per source, `stat` over the
/// candidates' `score / token_count`, then the mean over sources.
/// Empty candidates are skipped and counted.
pub fn spll(bundle: &EvalBundle, scorer: &dyn FluencyScorer, stat: SpllStat) -> Result<SpllResult> {
    let scores: Vec<Vec<f64>> = bundle
        .candidates
        .iter()
        .map(|list| list.iter().map(|hyp| scorer.score(hyp)).collect())
        .collect();
    spll_from_scores(bundle, &scores, stat)
}

/// Same aggregation with externally supplied raw scores (aligned with the
/// candidate matrix).
pub fn spll_from_scores(
    bundle: &EvalBundle,
    scores: &[Vec<f64>],
    stat: SpllStat,
) -> Result<SpllResult> {
    if scores.len() != bundle.len() {
        return Err(Error::invalid("scores not aligned with bundle"));
    }
    let mut total = 0.0f64;
    let mut used_sources = 0usize;
    let mut skipped = 0usize;
    for (list, row) in bundle.candidates.iter().zip(scores.iter()) {
        if row.len() != list.len() {
            return Err(Error::invalid("scores not aligned with candidate list"));
        }
        let mut normalized = Vec::with_capacity(list.len());
        for (hyp, &score) in list.iter().zip(row.iter()) {
            let len = hyp.split_whitespace().count();
            if len == 0 {
                skipped += 1;
                continue;
            }
            normalized.push(score / len as f64);
        }
        if normalized.is_empty() {
            skipped += 1;
            continue;
        }
        let agg = match stat {
            SpllStat::Max => normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            SpllStat::Min => normalized.iter().copied().fold(f64::INFINITY, f64::min),
            SpllStat::Mean => normalized.iter().sum::<f64>() / normalized.len() as f64,
        };
        total += agg;
        used_sources += 1;
    }
    if used_sources == 0 {
        return Err(Error::invalid("no scorable candidates"));
    }
    Ok(SpllResult {
        value: total / used_sources as f64,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(refs: &[&str], lists: &[&[&str]]) -> EvalBundle {
        EvalBundle::new(
            (0..refs.len()).map(|i| format!("src {i}")).collect(),
            refs.iter().map(|r| r.to_string()).collect(),
            lists
                .iter()
                .map(|l| l.iter().map(|h| h.to_string()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn bleu_at_one_is_rank_one_corpus_bleu() {
        let b = bundle(
            &["a b c d", "e f g h"],
            &[&["a b c d", "x x x x"], &["e f x h", "e f g h"]],
        );
        let rank1: Vec<&str> = vec!["a b c d", "e f x h"];
        let expected = corpus_bleu(&rank1, &["a b c d", "e f g h"]);
        assert_eq!(bleu_at_n(&b, 1).unwrap(), expected);
    }

    #[test]
    fn oracle_finds_the_reference_anywhere() {
        let b = bundle(
            &["a b c d", "e f g h"],
            &[&["x x x x", "a b c d"], &["e f g h", "y y y y"]],
        );
        assert_eq!(bleu_at_n(&b, 2).unwrap(), 1.0);
    }

    #[test]
    fn bleu_at_n_is_monotone_in_n() {
        let b = bundle(
            &["a b c d e", "f g h i j"],
            &[
                &["a b x d e", "a b c d e", "q q q q q"],
                &["f x h i j", "f g h q j", "f g h i j"],
            ],
        );
        let b1 = bleu_at_n(&b, 1).unwrap();
        let b2 = bleu_at_n(&b, 2).unwrap();
        let b3 = bleu_at_n(&b, 3).unwrap();
        assert!(b2 >= b1);
        assert!(b3 >= b2);
    }

    #[test]
    fn bleu_at_n_rejects_short_lists() {
        let b = bundle(&["a b"], &[&["a b"]]);
        assert!(bleu_at_n(&b, 2).is_err());
    }

    #[test]
    fn med_bleu_equals_oracle_on_identical_candidates() {
        let b = bundle(&["a b c d"], &[&["a b x d", "a b x d", "a b x d"]]);
        assert_eq!(med_bleu_at_n(&b, 3).unwrap(), bleu_at_n(&b, 3).unwrap());
    }

    #[test]
    fn med_bleu_picks_the_middle_of_three() {
        // sentence BLEUs strictly ordered: exact > one-sub > all-wrong
        let b = bundle(&["a b c d e"], &[&["a b c d e", "a b x d e", "q q q q q"]]);
        let expected = corpus_bleu(&["a b x d e"], &["a b c d e"]);
        assert_eq!(med_bleu_at_n(&b, 3).unwrap(), expected);
    }

    #[test]
    fn med_bleu_even_rule_takes_the_better_middle() {
        // four candidates with distinct sentence BLEUs; of the two middle
        // ones the higher is picked
        let b = bundle(
            &["a b c d e"],
            &[&[
                "a b c d e", // 1.0
                "a b c d x", // high
                "a b x y z", // low
                "q q q q q", // 0-ish
            ]],
        );
        let expected = corpus_bleu(&["a b c d x"], &["a b c d e"]);
        assert_eq!(med_bleu_at_n(&b, 4).unwrap(), expected);
    }

    #[test]
    fn merged_with_itself_is_bleu_at_n() {
        let b = bundle(
            &["a b c d", "e f g h"],
            &[&["a b x d", "a b c d"], &["e f g h", "y y y y"]],
        );
        assert_eq!(merged_bleu(&b, &b).unwrap(), bleu_at_n(&b, 2).unwrap());
    }

    #[test]
    fn merged_picks_the_reference_from_either_side() {
        let a = bundle(&["a b c d"], &[&["x x x x"]]);
        let b = bundle(&["a b c d"], &[&["a b c d"]]);
        assert_eq!(merged_bleu(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn merged_rejects_mismatched_sources() {
        let a = bundle(&["a b"], &[&["a b"]]);
        let mut b = a.clone();
        b.sources[0] = "other".into();
        assert!(merged_bleu(&a, &b).is_err());
    }

    #[test]
    fn ref_bleu_reduces_to_corpus_bleu_for_single_rank() {
        let b = bundle(&["a b c d", "e f g h"], &[&["a b x d"], &["e f g h"]]);
        let expected = corpus_bleu(&["a b x d", "e f g h"], &["a b c d", "e f g h"]);
        assert_eq!(ref_bleu(&b).unwrap(), expected);
    }

    #[test]
    fn ref_bleu_averages_rank_slices() {
        let b = bundle(
            &["a b c d", "e f g h"],
            &[&["a b c d", "a b x d"], &["e f g h", "e f x h"]],
        );
        let r0 = corpus_bleu(&["a b c d", "e f g h"], &["a b c d", "e f g h"]);
        let r1 = corpus_bleu(&["a b x d", "e f x h"], &["a b c d", "e f g h"]);
        assert!((ref_bleu(&b).unwrap() - (r0 + r1) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn dp_of_identical_ranks_is_zero() {
        let b = bundle(
            &["a b c d", "e f g h"],
            &[&["a b c d", "a b c d"], &["x y z w", "x y z w"]],
        );
        assert_eq!(dp(&b).unwrap(), 0.0);
    }

    #[test]
    fn dp_of_disjoint_ranks_is_one() {
        let b = bundle(&["a b c d"], &[&["a a a a", "b b b b", "c c c c"]]);
        assert_eq!(dp(&b).unwrap(), 1.0);
    }

    #[test]
    fn dp_matches_brute_force_double_loop() {
        let b = bundle(
            &["a b c d", "e f g h"],
            &[
                &["a b c d", "a b x d", "a y c d"],
                &["e f g h", "e f g h", "e q g h"],
            ],
        );
        let slices: Vec<Vec<&str>> = (0..3)
            .map(|r| b.candidates.iter().map(|l| l[r].as_str()).collect())
            .collect();
        let mut acc = 0.0;
        for r in 0..3 {
            for s in 0..3 {
                if r != s {
                    acc += 1.0 - corpus_bleu(&slices[r], &slices[s]);
                }
            }
        }
        let expected = acc / 6.0;
        assert!((dp(&b).unwrap() - expected).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&dp(&b).unwrap()));
    }

    #[test]
    fn dp_is_invariant_under_rank_permutation() {
        let b = bundle(
            &["a b c d", "e f g h"],
            &[
                &["a b c d", "a b x d", "a y c d"],
                &["e f g h", "e q g h", "e f g h"],
            ],
        );
        let permuted = bundle(
            &["a b c d", "e f g h"],
            &[
                &["a y c d", "a b c d", "a b x d"],
                &["e f g h", "e f g h", "e q g h"],
            ],
        );
        assert!((dp(&b).unwrap() - dp(&permuted).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn dp_requires_two_candidates() {
        let b = bundle(&["a b"], &[&["a b"]]);
        assert!(dp(&b).is_err());
    }

    #[test]
    fn deq_worked_examples() {
        assert_eq!(deq(0.5, 0.5, 0.2, 0.4), Some(0.0));
        // diversity up, quality down -> positive
        let v = deq(0.6, 0.4, 0.30, 0.35).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        assert_eq!(deq(0.6, 0.4, 0.3, 0.3), None);
    }

    #[test]
    fn distinct_ngram_worked_example() {
        // "a b a b": bigrams ab, ba, ab -> 2 distinct / 3 total
        let lists = vec![vec!["a b a b".to_string()]];
        let r = distinct_ngram_ratio(&lists, 2).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distinct_ngram_monotone_in_duplication() {
        let identical = vec![vec!["a b c".to_string(); 20]];
        let distinct: Vec<Vec<String>> = vec![(0..20).map(|i| format!("w{i} x{i} y{i}")).collect()];
        let ri = distinct_ngram_ratio(&identical, 2).unwrap();
        let rd = distinct_ngram_ratio(&distinct, 2).unwrap();
        assert!(rd > ri);
        assert_eq!(rd, 1.0);
    }

    #[test]
    fn distinct_ngram_errors_when_all_too_short() {
        let lists = vec![vec!["a".to_string()]];
        assert!(distinct_ngram_ratio(&lists, 2).is_err());
    }

    #[test]
    fn madll_worked_examples() {
        assert_eq!(madll(&[-1.0, -2.0], &[-1.0, -2.0]).unwrap().value, 0.0);
        assert_eq!(madll(&[-1.0, -2.0], &[-3.0, -2.0]).unwrap().value, 1.0);
        // shift invariance
        let a = [-1.5, -2.5, -0.5];
        let b = [-3.0, -1.0, -0.25];
        let shifted_a: Vec<f64> = a.iter().map(|x| x - 7.0).collect();
        let shifted_b: Vec<f64> = b.iter().map(|x| x - 7.0).collect();
        assert!(
            (madll(&a, &b).unwrap().value - madll(&shifted_a, &shifted_b).unwrap().value).abs()
                < 1e-12
        );
        // symmetry
        assert_eq!(madll(&a, &b).unwrap().value, madll(&b, &a).unwrap().value);
    }

    #[test]
    fn madll_excludes_non_finite_pairs() {
        let r = madll(&[-1.0, f64::NEG_INFINITY], &[-2.0, -1.0]).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.skipped, 1);
        assert!(madll(&[-1.0], &[-1.0, -2.0]).is_err());
    }

    #[test]
    fn spll_single_candidate_has_equal_stats() {
        let b = bundle(&["a b"], &[&["x y z"]]);
        let scorer = MockFluency { seed: 3 };
        let max = spll(&b, &scorer, SpllStat::Max).unwrap().value;
        let min = spll(&b, &scorer, SpllStat::Min).unwrap().value;
        let mean = spll(&b, &scorer, SpllStat::Mean).unwrap().value;
        assert_eq!(max, min);
        assert_eq!(max, mean);
    }

    #[test]
    fn spll_with_length_scorer_is_minus_one() {
        let b = bundle(&["a b", "c d"], &[&["x y z", "p q"], &["m n o p", "u"]]);
        let scorer = |s: &str| -(s.split_whitespace().count() as f64);
        for stat in [SpllStat::Max, SpllStat::Min, SpllStat::Mean] {
            assert!((spll(&b, &scorer, stat).unwrap().value + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn spll_two_candidate_fixture() {
        let b = bundle(&["a b"], &[&["x y", "p q r"]]);
        // scores -4 and -9 over lengths 2 and 3 -> normalized -2 and -3
        let scorer = |s: &str| match s {
            "x y" => -4.0,
            _ => -9.0,
        };
        assert_eq!(spll(&b, &scorer, SpllStat::Max).unwrap().value, -2.0);
        assert_eq!(spll(&b, &scorer, SpllStat::Min).unwrap().value, -3.0);
        assert_eq!(spll(&b, &scorer, SpllStat::Mean).unwrap().value, -2.5);
    }

    #[test]
    fn spll_skips_empty_candidates() {
        let b = bundle(&["a b"], &[&["", "x y"]]);
        let scorer = |_: &str| -2.0;
        let r = spll(&b, &scorer, SpllStat::Mean).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.value, -1.0);
    }
}
