//! Decoders over the composed next-token distribution: beam search, diverse
//! beam search with a selection-count penalty, nucleus sampling with N
//! independent trajectories, and forced decoding of a fixed target.
//!
//! The per-step pipeline wires model → perturbation → search → scoring →
//! interpolation. Every random draw comes from a stream keyed by
//! `(seed, purpose, sentence, group, slot, step)`, so decode output is a
//! pure function of the configuration and is independent of sentence
//! processing order and thread count.

use serde::{Deserialize, Serialize};

use crate::datastore::{search_ivf, Datastore, IvfIndex, NeighborSet};
use crate::error::{Error, Result};
use crate::perturb::{
    adaptive_params, noised_query, randomized_select, NoiseParams, PerturbConfig,
};
use crate::rng::{stream, Purpose};
use crate::scoring::{
    interpolate, knn_distribution, uniquify_distribution, ScoreConfig, TokenDistribution,
};
use crate::toymodel::{TableModel, BOS, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Beam,
    Dbs,
    Nucleus,
}

/// Everything that selects a pipeline variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub decoder: DecoderKind,
    /// Number of returned hypotheses (beam size / trajectory count).
    pub beam_size: usize,
    /// Number of diverse-beam groups (used when `decoder == Dbs`).
    pub dbs_groups: usize,
    /// Penalty per prior same-step selection of a token by earlier groups.
    pub diversity_strength: f64,
    /// Nucleus mass threshold (used when `decoder == Nucleus`).
    pub nucleus_p: f64,
    /// Neighbors per retrieval query.
    pub k: usize,
    pub score: ScoreConfig,
    pub perturb: PerturbConfig,
    /// Maximum generated tokens per hypothesis, end-of-sentence included.
    pub max_len: usize,
    pub seed: u64,
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::invalid("beam_size must be >= 1"));
        }
        if self.decoder == DecoderKind::Dbs && !(1..=self.beam_size).contains(&self.dbs_groups) {
            return Err(Error::invalid("dbs_groups must be in 1..=beam_size"));
        }
        if self.decoder == DecoderKind::Nucleus
            && (self.nucleus_p.is_nan() || self.nucleus_p <= 0.0 || self.nucleus_p > 1.0)
        {
            return Err(Error::invalid("nucleus_p must be in (0, 1]"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("max_len must be >= 1"));
        }
        self.score.validate()?;
        self.perturb.validate()
    }
}

/// One decoded hypothesis. `tokens` runs from `<bos>` to `<eos>` (or to the
/// length cap), `logprob` is the sum of interpolated log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<u32>,
    pub logprob: f64,
    pub finished: bool,
}

/// Ordered N-best output for one source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    pub source: Vec<u32>,
    pub hypotheses: Vec<Hypothesis>,
    /// True when the decoder could not produce `beam_size` distinct finished
    /// hypotheses and duplicated the last entry to fill the list.
    pub padded: bool,
    /// Steps at which retrieval came back empty and scoring fell back to
    /// the base model.
    pub knn_fallbacks: usize,
}

/// A composed scoring step's output.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    pub probs: TokenDistribution,
    pub knn_fallback: bool,
}

/// Which index a pipeline searches with.
#[derive(Clone, Copy)]
pub enum Searcher<'a> {
    Exact,
    Ivf { index: &'a IvfIndex, n_probe: usize },
}

/// Immutable decoding context: model, datastore, searcher, configuration.
pub struct Pipeline<'a> {
    pub model: &'a TableModel,
    pub datastore: &'a Datastore,
    pub searcher: Searcher<'a>,
    pub config: &'a DecodeConfig,
}

/// Position of a draw inside a decode run, used to key RNG streams.
#[derive(Debug, Clone, Copy)]
struct DrawKey {
    sentence: u64,
    group: u64,
    slot: u64,
    step: u64,
}

impl DrawKey {
    fn parts(&self) -> [u64; 4] {
        [self.sentence, self.group, self.slot, self.step]
    }
}

impl<'a> Pipeline<'a> {
    pub fn new(
        model: &'a TableModel,
        datastore: &'a Datastore,
        searcher: Searcher<'a>,
        config: &'a DecodeConfig,
    ) -> Result<Self> {
        config.validate()?;
        if let Searcher::Ivf { index, n_probe } = searcher {
            if n_probe == 0 || n_probe > index.n_clusters() {
                return Err(Error::invalid("n_probe out of range for the index"));
            }
        }
        Ok(Pipeline {
            model,
            datastore,
            searcher,
            config,
        })
    }

    fn search(&self, query: &[f32], k: usize) -> Result<NeighborSet> {
        match self.searcher {
            Searcher::Exact => self.datastore.search_exact(query, k),
            Searcher::Ivf { index, n_probe } => {
                search_ivf(self.datastore, index, query, k, n_probe)
            }
        }
    }

    /// The composed next-token distribution for one `(source, prefix)`
    /// context. Order of operations: hidden state; optional pre-search for
    /// adaptive noise; optional query noise; retrieval (over the expanded
    /// pool when randomizing); optional subsampling; neighbor scoring;
    /// interpolation with the base distribution.
    fn next_distribution_keyed(
        &self,
        source_ids: &[u32],
        prefix: &[u32],
        key: DrawKey,
    ) -> Result<StepDistribution> {
        let cfg = self.config;
        let step_out = self.model.step(source_ids, prefix)?;
        if cfg.score.lambda == 0.0 {
            // interpolation would discard the retrieval entirely
            return Ok(StepDistribution {
                probs: step_out.p_mt,
                knn_fallback: false,
            });
        }
        let mut query = step_out.hidden;

        let noise = match cfg.perturb {
            PerturbConfig::StaticNoise { h_m, h_s } => Some(NoiseParams { m: h_m, s: h_s }),
            PerturbConfig::AdaptiveNoise { h_m_mult, h_s_mult } => {
                let pre = self.search(&query, cfg.k)?;
                if pre.is_empty() {
                    None // empty datastore; the main search will also be empty
                } else {
                    Some(adaptive_params(&pre, h_m_mult, h_s_mult)?)
                }
            }
            _ => None,
        };
        if let Some(params) = noise {
            let mut rng = stream(cfg.seed, Purpose::Noise, &key.parts());
            query = noised_query(&query, &params, &mut rng);
        }

        let mut neighbors = self.search(&query, cfg.perturb.fetch_k(cfg.k))?;
        if let PerturbConfig::Randomize { .. } = cfg.perturb {
            let mut rng = stream(cfg.seed, Purpose::RandomizeSelect, &key.parts());
            neighbors = randomized_select(&neighbors, cfg.k, &mut rng);
        }

        let vocab = self.model.vocab_tgt.len();
        let p_knn = if cfg.score.uniquify {
            uniquify_distribution(&neighbors, cfg.score.tau, vocab)?
        } else {
            knn_distribution(&neighbors, cfg.score.tau, vocab)?
        };
        let (probs, knn_fallback) = interpolate(p_knn.as_ref(), &step_out.p_mt, cfg.score.lambda)?;
        Ok(StepDistribution {
            probs,
            knn_fallback,
        })
    }

    /// Public single-context entry point (beam slot 0 of group 0); used for
    /// audits and tests. `step` is the number of already-generated tokens.
    pub fn next_distribution(
        &self,
        source_ids: &[u32],
        prefix: &[u32],
        sentence: u64,
        step: u64,
    ) -> Result<StepDistribution> {
        self.next_distribution_keyed(
            source_ids,
            prefix,
            DrawKey {
                sentence,
                group: 0,
                slot: 0,
                step,
            },
        )
    }

    /// Decodes one source sentence with the configured decoder.
    pub fn decode(&self, source_ids: &[u32], sentence: u64) -> Result<CandidateList> {
        match self.config.decoder {
            DecoderKind::Beam => self.grouped_beam(source_ids, sentence, 1, 0.0),
            DecoderKind::Dbs => self.grouped_beam(
                source_ids,
                sentence,
                self.config.dbs_groups,
                self.config.diversity_strength,
            ),
            DecoderKind::Nucleus => self.nucleus(source_ids, sentence),
        }
    }

    /// Shared beam engine. Plain beam search is the single-group case.
    ///
    /// Groups advance sequentially within a time step; group `g` scores a
    /// candidate token by its accumulated log-probability minus
    /// `lambda_div` times the number of times earlier groups selected that
    /// token at this step. Finished hypotheses retire from their group
    /// without consuming a beam slot.
    fn grouped_beam(
        &self,
        source_ids: &[u32],
        sentence: u64,
        n_groups: usize,
        lambda_div: f64,
    ) -> Result<CandidateList> {
        let n = self.config.beam_size;
        let base = n / n_groups;
        let extra = n % n_groups;
        let group_sizes: Vec<usize> = (0..n_groups)
            .map(|g| base + usize::from(g < extra))
            .collect();

        struct Group {
            size: usize,
            active: Vec<Hypothesis>,
            finished: Vec<Hypothesis>,
            done: bool,
        }
        let mut groups: Vec<Group> = group_sizes
            .iter()
            .map(|&size| Group {
                size,
                active: vec![Hypothesis {
                    tokens: vec![BOS],
                    logprob: 0.0,
                    finished: false,
                }],
                finished: Vec::new(),
                done: size == 0,
            })
            .collect();
        let mut knn_fallbacks = 0usize;

        for step in 0..self.config.max_len as u64 {
            let mut step_selections: Vec<u32> = Vec::new();
            for (g, group) in groups.iter_mut().enumerate() {
                if group.done {
                    continue;
                }
                // candidate = (selection score, token, parent slot, logprob)
                let mut candidates: Vec<(f64, u32, usize, f64)> = Vec::new();
                for (slot, hyp) in group.active.iter().enumerate() {
                    let dist = self.next_distribution_keyed(
                        source_ids,
                        &hyp.tokens,
                        DrawKey {
                            sentence,
                            group: g as u64,
                            slot: slot as u64,
                            step,
                        },
                    )?;
                    knn_fallbacks += usize::from(dist.knn_fallback);
                    for (token, &p) in dist.probs.probs().iter().enumerate() {
                        if p <= 0.0 {
                            continue;
                        }
                        let token = token as u32;
                        let logprob = hyp.logprob + p.ln();
                        let penalty = lambda_div
                            * step_selections.iter().filter(|&&t| t == token).count() as f64;
                        candidates.push((logprob - penalty, token, slot, logprob));
                    }
                }
                candidates
                    .sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

                let mut next_active = Vec::with_capacity(group.size);
                for &(_, token, slot, logprob) in &candidates {
                    if next_active.len() == group.size {
                        break;
                    }
                    let mut tokens = group.active[slot].tokens.clone();
                    tokens.push(token);
                    step_selections.push(token);
                    if token == EOS {
                        group.finished.push(Hypothesis {
                            tokens,
                            logprob,
                            finished: true,
                        });
                    } else {
                        next_active.push(Hypothesis {
                            tokens,
                            logprob,
                            finished: false,
                        });
                    }
                }
                group.active = next_active;

                // Scores only decrease along a path, so once the group has
                // enough finished hypotheses that even the best active
                // cannot beat them, it is done.
                if group.active.is_empty() {
                    group.done = true;
                } else if group.finished.len() >= group.size {
                    let mut scores: Vec<f64> = group.finished.iter().map(|h| h.logprob).collect();
                    scores.sort_by(|a, b| b.total_cmp(a));
                    let bar = scores[group.size - 1];
                    let best_active = group
                        .active
                        .iter()
                        .map(|h| h.logprob)
                        .fold(f64::NEG_INFINITY, f64::max);
                    if best_active <= bar {
                        group.done = true;
                    }
                }
            }
            if groups.iter().all(|g| g.done) {
                break;
            }
        }

        // Length cap: whatever is still active finishes as-is.
        for g in &mut groups {
            for mut hyp in g.active.drain(..) {
                hyp.finished = true;
                g.finished.push(hyp);
            }
        }

        let mut hypotheses = Vec::with_capacity(n);
        let mut padded = false;
        for g in &mut groups {
            g.finished.sort_by(|a, b| {
                b.logprob
                    .total_cmp(&a.logprob)
                    .then(a.tokens.cmp(&b.tokens))
            });
            g.finished.truncate(g.size);
            if g.finished.len() < g.size {
                padded = true;
                let last =
                    g.finished.last().cloned().ok_or_else(|| {
                        Error::Internal("beam group produced no hypotheses".into())
                    })?;
                while g.finished.len() < g.size {
                    g.finished.push(last.clone());
                }
            }
            hypotheses.append(&mut g.finished);
        }

        Ok(CandidateList {
            source: source_ids.to_vec(),
            hypotheses,
            padded,
            knn_fallbacks,
        })
    }

    /// N independent sampled trajectories. At each step the minimal
    /// probability-sorted prefix with cumulative mass >= p is kept (ties in
    /// the sort break by token id) and one token is drawn from it.
    /// Duplicate trajectories are retained; hypotheses stay in trajectory
    /// order.
    fn nucleus(&self, source_ids: &[u32], sentence: u64) -> Result<CandidateList> {
        let p = self.config.nucleus_p;
        let mut hypotheses = Vec::with_capacity(self.config.beam_size);
        let mut knn_fallbacks = 0usize;
        for traj in 0..self.config.beam_size as u64 {
            let mut tokens = vec![BOS];
            let mut logprob = 0.0f64;
            for step in 0..self.config.max_len as u64 {
                let dist = self.next_distribution_keyed(
                    source_ids,
                    &tokens,
                    DrawKey {
                        sentence,
                        group: 0,
                        slot: traj,
                        step,
                    },
                )?;
                knn_fallbacks += usize::from(dist.knn_fallback);
                let mut rng = stream(
                    self.config.seed,
                    Purpose::NucleusDraw,
                    &[sentence, 0, traj, step],
                );
                let token = sample_nucleus(&dist.probs, p, &mut rng);
                logprob += dist.probs.prob(token).ln();
                tokens.push(token);
                if token == EOS {
                    break;
                }
            }
            hypotheses.push(Hypothesis {
                tokens,
                logprob,
                finished: true,
            });
        }
        Ok(CandidateList {
            source: source_ids.to_vec(),
            hypotheses,
            padded: false,
            knn_fallbacks,
        })
    }

    /// Log-likelihood of a fixed target under the composed pipeline.
    /// A zero-probability target token pins the result to `-inf`; the
    /// number of such steps is reported alongside.
    pub fn forced_decode(
        &self,
        source_ids: &[u32],
        target: &[u32],
        sentence: u64,
    ) -> Result<ForcedScore> {
        if target.first() != Some(&BOS) || target.last() != Some(&EOS) || target.len() < 2 {
            return Err(Error::invalid("forced target must run from <bos> to <eos>"));
        }
        let mut loglik = 0.0f64;
        let mut zero_prob_steps = 0usize;
        for t in 1..target.len() {
            let dist = self.next_distribution_keyed(
                source_ids,
                &target[..t],
                DrawKey {
                    sentence,
                    group: 0,
                    slot: 0,
                    step: (t - 1) as u64,
                },
            )?;
            let p = dist.probs.prob(target[t]);
            if p <= 0.0 {
                zero_prob_steps += 1;
                loglik = f64::NEG_INFINITY;
            } else {
                loglik += p.ln();
            }
        }
        Ok(ForcedScore {
            loglik,
            zero_prob_steps,
        })
    }
}

/// Forced-decoding outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedScore {
    pub loglik: f64,
    pub zero_prob_steps: usize,
}

/// Sorts tokens by probability (descending, ties by id), keeps the minimal
/// prefix whose cumulative mass reaches `p`, and samples from it.
pub fn sample_nucleus<R: rand::Rng>(dist: &TokenDistribution, p: f64, rng: &mut R) -> u32 {
    let mut order: Vec<u32> = (0..dist.vocab_size() as u32).collect();
    order.sort_by(|&a, &b| dist.prob(b).total_cmp(&dist.prob(a)).then(a.cmp(&b)));
    let mut cut = order.len();
    let mut cum = 0.0f64;
    for (i, &tok) in order.iter().enumerate() {
        cum += dist.prob(tok);
        if cum >= p - 1e-12 {
            cut = i + 1;
            break;
        }
    }
    let nucleus = &order[..cut];
    let total: f64 = nucleus.iter().map(|&t| dist.prob(t)).sum();
    let mut u = rng.gen::<f64>() * total;
    for &tok in nucleus {
        u -= dist.prob(tok);
        if u < 0.0 {
            return tok;
        }
    }
    nucleus[nucleus.len() - 1]
}
