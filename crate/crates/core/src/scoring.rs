//! Turns a retrieved neighbor set plus the base model's distribution into
//! the final next-token distribution.
//!
//! Two neighbor-scoring rules are provided: the vanilla one sums
//! `exp(-dist/tau)` over all neighbors carrying a token, the uniquify one
//! keeps only the closest neighbor per token (a max instead of a sum), so
//! duplicated tokens in the neighbor set cannot pile up probability mass.
//! Both are normalized; the max-based rule is written unnormalized in its
//! usual presentation but is a `p ∝` definition like the vanilla one.
//! Both subtract the minimum distance before exponentiating, which is
//! invariant under normalization and avoids underflow at small `tau`.

use serde::{Deserialize, Serialize};

use crate::datastore::NeighborSet;
use crate::error::{Error, Result};

/// Dense probability vector over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    /// Wraps a dense probability vector, checking it is a distribution:
    /// non-negative, NaN-free, summing to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty probability vector"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("negative or non-finite probability"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(TokenDistribution { probs })
    }

    /// Point mass on a single token.
    pub fn one_hot(vocab_size: usize, token: usize) -> Self {
        let mut probs = vec![0.0; vocab_size];
        probs[token] = 1.0;
        TokenDistribution { probs }
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, token: u32) -> f64 {
        self.probs[token as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the largest probability, ties to the lowest token id.
    pub fn argmax(&self) -> u32 {
        let mut best = 0usize;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best as u32
    }
}

/// Parameters of the scoring step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Softmax temperature over negative squared distances.
    pub tau: f64,
    /// Interpolation weight of the neighbor distribution.
    pub lambda: f64,
    /// Keep only the closest neighbor per token before scoring.
    pub uniquify: bool,
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(Error::invalid("tau must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid("lambda must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Softmax of negative scaled distances, with per-token mass accumulated by
/// `sum` (vanilla) or `max` (uniquify). `None` for an empty neighbor set;
/// the caller falls back to the base model's distribution.
fn neighbor_distribution(
    ns: &NeighborSet,
    tau: f64,
    vocab_size: usize,
    unique: bool,
) -> Result<Option<TokenDistribution>> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::invalid("tau must be > 0"));
    }
    if ns.is_empty() {
        return Ok(None);
    }
    let min_dist = ns.distances().fold(f64::INFINITY, |acc, d| acc.min(d));
    let mut mass = vec![0.0f64; vocab_size];
    for n in ns.iter() {
        let token = n.token as usize;
        if token >= vocab_size {
            return Err(Error::invalid(format!(
                "neighbor token {token} out of range for vocab_size {vocab_size}"
            )));
        }
        let w = (-(n.distance - min_dist) / tau).exp();
        if unique {
            // closest neighbor per token wins; neighbors are distance-sorted
            // so this is also "first occurrence wins"
            mass[token] = mass[token].max(w);
        } else {
            mass[token] += w;
        }
    }
    let total: f64 = mass.iter().sum();
    debug_assert!(total > 0.0);
    for m in &mut mass {
        *m /= total;
    }
    Ok(Some(TokenDistribution { probs: mass }))
}

/// Vanilla neighbor distribution: per token, the sum of `exp(-dist/tau)`
/// over all neighbors carrying it, normalized.
pub fn knn_distribution(
    ns: &NeighborSet,
    tau: f64,
    vocab_size: usize,
) -> Result<Option<TokenDistribution>> {
    neighbor_distribution(ns, tau, vocab_size, false)
}

/// Uniquified neighbor distribution: per token, only the closest neighbor
/// contributes (max instead of sum), normalized.
pub fn uniquify_distribution(
    ns: &NeighborSet,
    tau: f64,
    vocab_size: usize,
) -> Result<Option<TokenDistribution>> {
    neighbor_distribution(ns, tau, vocab_size, true)
}

/// Linear interpolation `lambda * p_knn + (1 - lambda) * p_mt`.
///
/// A missing neighbor distribution (empty datastore, over-filtered probes)
/// degrades to the base distribution; the returned flag records that the
/// fallback fired.
pub fn interpolate(
    p_knn: Option<&TokenDistribution>,
    p_mt: &TokenDistribution,
    lambda: f64,
) -> Result<(TokenDistribution, bool)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid("lambda must be in [0, 1]"));
    }
    let p_knn = match p_knn {
        None => return Ok((p_mt.clone(), true)),
        Some(p) => p,
    };
    if p_knn.vocab_size() != p_mt.vocab_size() {
        return Err(Error::invalid(format!(
            "vocab size mismatch: {} vs {}",
            p_knn.vocab_size(),
            p_mt.vocab_size()
        )));
    }
    if lambda == 0.0 {
        return Ok((p_mt.clone(), false));
    }
    if lambda == 1.0 {
        return Ok((p_knn.clone(), false));
    }
    let probs = p_knn
        .probs
        .iter()
        .zip(p_mt.probs.iter())
        .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    Ok((TokenDistribution { probs }, false))
}
