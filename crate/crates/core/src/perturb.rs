//! Search-space perturbations: query noise with a folded-Gaussian norm,
//! adaptive noise magnitudes derived from a pre-search, and randomized
//! subsampling of an expanded neighbor pool.
//!
//! Noise magnitudes are in the same units as neighbor distances, i.e.
//! squared-L2 — the norm target `|a|` is compared against, and typically
//! derived from, squared distances. Every stochastic operation takes an
//! explicit RNG so that results are a pure function of the derived stream.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datastore::{cmp_neighbors, Datastore, NeighborSet};
use crate::error::{Error, Result};

/// Target mean and standard deviation of the noise norm `|a|`,
/// `a ~ N(m, s^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub m: f64,
    pub s: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !self.m.is_finite() || !self.s.is_finite() || self.s < 0.0 {
            return Err(Error::invalid("noise params must be finite with s >= 0"));
        }
        Ok(())
    }

    /// Derives static-noise parameters from pooled distance statistics:
    /// `m = h_m_mult * mean`, `s = h_s_mult * std`.
    pub fn from_stats(stats: &DistanceStats, h_m_mult: f64, h_s_mult: f64) -> Self {
        NoiseParams {
            m: h_m_mult * stats.mean,
            s: h_s_mult * stats.std,
        }
    }
}

/// Which perturbation a decode run applies. Exactly one is active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbConfig {
    /// Unperturbed pipeline.
    None,
    /// Query noise with fixed norm statistics.
    StaticNoise { h_m: f64, h_s: f64 },
    /// Query noise scaled per step from a pre-search: `m = h_m_mult * d_max`,
    /// `s = h_s_mult * d_std` over the pre-search distances.
    AdaptiveNoise { h_m_mult: f64, h_s_mult: f64 },
    /// Retrieve `floor(h * k)` neighbors, keep a uniform subset of `k`.
    Randomize { h: f64 },
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbConfig::None => Ok(()),
            PerturbConfig::StaticNoise { h_m, h_s } => NoiseParams { m: h_m, s: h_s }.validate(),
            PerturbConfig::AdaptiveNoise { h_m_mult, h_s_mult } => {
                if !h_m_mult.is_finite() || !h_s_mult.is_finite() {
                    return Err(Error::invalid("adaptive multipliers must be finite"));
                }
                Ok(())
            }
            PerturbConfig::Randomize { h } => {
                if h.is_nan() || h <= 1.0 {
                    return Err(Error::invalid("randomize requires h > 1"));
                }
                Ok(())
            }
        }
    }

    /// How many neighbors the search step must fetch.
    pub fn fetch_k(&self, k: usize) -> usize {
        match *self {
            PerturbConfig::Randomize { h } => (h * k as f64).floor() as usize,
            _ => k,
        }
    }
}

/// Distance statistics over `(query, neighbor)` samples.
///
/// `mean`/`std` pool every sample flat; `d_max`/`d_std` average the
/// per-query maxima and per-query standard deviations. All standard
/// deviations here are population (divide-by-n) estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub mean: f64,
    pub std: f64,
    pub d_max: f64,
    pub d_std: f64,
}

fn population_std(values: &[f64], mean: f64) -> f64 {
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.max(0.0).sqrt()
}

/// Draws a noise vector: an isotropic Gaussian direction rescaled to norm
/// `|a|` with `a ~ N(m, s^2)`. Degenerates to the zero vector when the
/// drawn magnitude or the direction is zero.
///
/// The norm therefore follows a folded normal; when `s` is large relative
/// to `m` the folding noticeably shifts its mean above `m`, and no upper
/// cap is imposed.
pub fn sample_noise<R: Rng>(dim: usize, params: &NoiseParams, rng: &mut R) -> Vec<f64> {
    debug_assert!(dim >= 1);
    if params.m == 0.0 && params.s == 0.0 {
        return vec![0.0; dim];
    }
    let a: f64 = if params.s == 0.0 {
        params.m
    } else {
        Normal::new(params.m, params.s)
            .expect("validated params")
            .sample(rng)
    };
    let magnitude = a.abs();
    let direction: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = direction.iter().map(|g| g * g).sum::<f64>().sqrt();
    if magnitude == 0.0 || norm == 0.0 {
        return vec![0.0; dim];
    }
    direction.iter().map(|g| g * magnitude / norm).collect()
}

/// Adds a sampled noise vector to the query.
pub fn noised_query<R: Rng>(query: &[f32], params: &NoiseParams, rng: &mut R) -> Vec<f32> {
    let z = sample_noise(query.len(), params, rng);
    query
        .iter()
        .zip(z.iter())
        .map(|(&q, &zi)| (q as f64 + zi) as f32)
        .collect()
}

/// Derives per-step noise parameters from an unperturbed pre-search:
/// `m = h_m_mult * max(distances)`, `s = h_s_mult * std(distances)`.
pub fn adaptive_params(
    pre_search: &NeighborSet,
    h_m_mult: f64,
    h_s_mult: f64,
) -> Result<NoiseParams> {
    if pre_search.is_empty() {
        return Err(Error::invalid(
            "adaptive noise needs a non-empty pre-search",
        ));
    }
    let distances: Vec<f64> = pre_search.distances().collect();
    let d_max = distances.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d));
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    let d_std = population_std(&distances, mean);
    Ok(NoiseParams {
        m: h_m_mult * d_max,
        s: h_s_mult * d_std,
    })
}

/// Pools exact k-NN distances of every query against the datastore.
/// Used to calibrate static noise from validation data ahead of decoding.
pub fn estimate_distance_stats<Q: AsRef<[f32]>>(
    ds: &Datastore,
    queries: &[Q],
    k: usize,
) -> Result<DistanceStats> {
    if ds.is_empty() {
        return Err(Error::invalid("datastore is empty"));
    }
    if queries.is_empty() {
        return Err(Error::invalid("no queries given"));
    }
    let mut all = Vec::new();
    let mut per_query_max = Vec::with_capacity(queries.len());
    let mut per_query_std = Vec::with_capacity(queries.len());
    for q in queries {
        let ns = ds.search_exact(q.as_ref(), k)?;
        let distances: Vec<f64> = ns.distances().collect();
        let mean = distances.iter().sum::<f64>() / distances.len() as f64;
        per_query_max.push(distances.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d)));
        per_query_std.push(population_std(&distances, mean));
        all.extend_from_slice(&distances);
    }
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    Ok(DistanceStats {
        mean,
        std: population_std(&all, mean),
        d_max: per_query_max.iter().sum::<f64>() / per_query_max.len() as f64,
        d_std: per_query_std.iter().sum::<f64>() / per_query_std.len() as f64,
    })
}

/// Uniform sample without replacement of `min(k, len)` neighbors out of the
/// candidate pool, re-sorted by `(distance, key_index)`. When the pool is
/// no larger than `k` the input is returned unchanged and the RNG is not
/// touched.
pub fn randomized_select<R: Rng>(candidates: &NeighborSet, k: usize, rng: &mut R) -> NeighborSet {
    if candidates.len() <= k {
        return candidates.clone();
    }
    let mut picked: Vec<usize> = (0..candidates.len()).collect();
    picked.partial_shuffle(rng, k);
    let mut kept: Vec<_> = picked[..k]
        .iter()
        .map(|&i| candidates.neighbors()[i])
        .collect();
    kept.sort_by(cmp_neighbors);
    NeighborSet::new(kept)
}
