//! A deterministic, trainable-by-counting toy sequence model. It supplies
//! the base distribution `p_mt` and a hidden-state query vector per step,
//! standing in for a neural translation model so the retrieval pipeline is
//! testable at desk scale.
//!
//! The hidden state depends on a bag-of-words summary of the source plus
//! only the last two prefix tokens. Contexts that share those collide in
//! vector space on purpose: duplicate tokens then genuinely appear in
//! retrieved neighbor sets, which is the regime the uniquify scoring rule
//! exists for.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scoring::TokenDistribution;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token <-> id bijection with fixed reserved ids 0..=3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabData", into = "VocabData")]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    ids: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabData {
    tokens: Vec<String>,
}

impl From<VocabData> for Vocab {
    fn from(data: VocabData) -> Self {
        Vocab::from_tokens(data.tokens)
    }
}

impl From<Vocab> for VocabData {
    fn from(v: Vocab) -> Self {
        VocabData { tokens: v.tokens }
    }
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, ids }
    }

    /// Builds a vocabulary from one side of a corpus: reserved tokens first,
    /// then all surface forms in sorted order.
    pub fn from_sentences<S: AsRef<str>>(sentences: impl IntoIterator<Item = S>) -> Self {
        let mut seen: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        for sentence in sentences {
            for tok in sentence.as_ref().split_whitespace() {
                seen.insert(tok.to_string());
            }
        }
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(seen);
        Vocab::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }

    /// Id for a surface form, `UNK` if absent.
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn encode(&self, sentence: &str) -> Vec<u32> {
        sentence.split_whitespace().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }
}

/// Unit-norm embedding derived from a counter-based stream keyed by
/// `(seed, token id)`; identical across runs and platforms.
pub fn token_embedding(token: u32, dim: usize, seed: u64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    debug_assert!(dim >= 1);
    let mut rng = stream(seed, Purpose::Embedding, &[token as u64]);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Order-insensitive hash of a source sentence's token bag.
fn source_bucket(source_ids: &[u32]) -> u64 {
    let mut sorted: Vec<u32> = source_ids.to_vec();
    sorted.sort_unstable();
    let mut acc: u64 = 0x243f_6a88_85a3_08d3;
    for id in sorted {
        // order-independent would lose multiplicity ordering; the ids are
        // sorted first so chaining is fine
        acc = splitmix(acc ^ (id as u64 + 1));
    }
    acc
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Conditioning context for the count table: source bag bucket plus the
/// last two prefix tokens (`PAD`-filled when the prefix is shorter).
type Context = (u64, u32, u32);

/// Count-based sequence model with add-alpha smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct TableModel {
    pub vocab_src: Vocab,
    pub vocab_tgt: Vocab,
    alpha: f64,
    embed_dim: usize,
    embed_seed: u64,
    counts: BTreeMap<Context, BTreeMap<u32, u32>>,
    /// Cached embeddings for ids up to max(vocab sizes).
    embeddings: Vec<Vec<f64>>,
    /// Projection from the concatenated summary (2*dim) to dim.
    projection: Vec<f64>,
}

/// One serialized count-table row: `(bucket, prev2, prev1, [(token, count)])`.
pub type CountRow = (u64, u32, u32, Vec<(u32, u32)>);

/// Serializable view of a [`TableModel`]; caches are rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelData {
    pub vocab_src: Vocab,
    pub vocab_tgt: Vocab,
    pub alpha: f64,
    pub embed_dim: usize,
    pub embed_seed: u64,
    /// Rows in sorted order.
    pub counts: Vec<CountRow>,
}

/// One decoding step's outputs: the smoothed base distribution and the
/// hidden-state vector used as retrieval query (and datastore key).
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub p_mt: TokenDistribution,
    pub hidden: Vec<f32>,
}

impl TableModel {
    /// Accumulates counts over an aligned parallel corpus.
    pub fn train<S: AsRef<str>>(
        sources: &[S],
        targets: &[S],
        alpha: f64,
        embed_dim: usize,
        embed_seed: u64,
    ) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::invalid("empty corpus"));
        }
        if sources.len() != targets.len() {
            return Err(Error::invalid(format!(
                "corpus sides have different lengths: {} vs {}",
                sources.len(),
                targets.len()
            )));
        }
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::invalid("alpha must be > 0"));
        }
        if embed_dim == 0 {
            return Err(Error::invalid("embed_dim must be >= 1"));
        }
        let vocab_src = Vocab::from_sentences(sources.iter().map(|s| s.as_ref()));
        let vocab_tgt = Vocab::from_sentences(targets.iter().map(|s| s.as_ref()));

        let mut counts: BTreeMap<Context, BTreeMap<u32, u32>> = BTreeMap::new();
        for (src, tgt) in sources.iter().zip(targets.iter()) {
            let src_ids = vocab_src.encode(src.as_ref());
            if src_ids.is_empty() {
                return Err(Error::invalid("corpus contains an empty source side"));
            }
            let bucket = source_bucket(&src_ids);
            let mut y = vec![BOS];
            y.extend(vocab_tgt.encode(tgt.as_ref()));
            y.push(EOS);
            for i in 1..y.len() {
                let prev1 = y[i - 1];
                let prev2 = if i >= 2 { y[i - 2] } else { PAD };
                *counts
                    .entry((bucket, prev2, prev1))
                    .or_default()
                    .entry(y[i])
                    .or_insert(0) += 1;
            }
        }
        Ok(Self::assemble(
            vocab_src, vocab_tgt, alpha, embed_dim, embed_seed, counts,
        ))
    }

    fn assemble(
        vocab_src: Vocab,
        vocab_tgt: Vocab,
        alpha: f64,
        embed_dim: usize,
        embed_seed: u64,
        counts: BTreeMap<Context, BTreeMap<u32, u32>>,
    ) -> Self {
        let max_vocab = vocab_src.len().max(vocab_tgt.len());
        let embeddings = (0..max_vocab as u32)
            .map(|id| token_embedding(id, embed_dim, embed_seed))
            .collect();
        let projection = projection_matrix(embed_dim, embed_seed);
        TableModel {
            vocab_src,
            vocab_tgt,
            alpha,
            embed_dim,
            embed_seed,
            counts,
            embeddings,
            projection,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn embed_seed(&self) -> u64 {
        self.embed_seed
    }

    pub fn to_data(&self) -> ModelData {
        ModelData {
            vocab_src: self.vocab_src.clone(),
            vocab_tgt: self.vocab_tgt.clone(),
            alpha: self.alpha,
            embed_dim: self.embed_dim,
            embed_seed: self.embed_seed,
            counts: self
                .counts
                .iter()
                .map(|(&(b, p2, p1), m)| (b, p2, p1, m.iter().map(|(&t, &c)| (t, c)).collect()))
                .collect(),
        }
    }

    pub fn from_data(data: ModelData) -> Result<Self> {
        if data.alpha.is_nan() || data.alpha <= 0.0 {
            return Err(Error::invalid("alpha must be > 0"));
        }
        if data.embed_dim == 0 {
            return Err(Error::invalid("embed_dim must be >= 1"));
        }
        let mut counts: BTreeMap<Context, BTreeMap<u32, u32>> = BTreeMap::new();
        for (b, p2, p1, row) in data.counts {
            counts.insert((b, p2, p1), row.into_iter().collect());
        }
        Ok(Self::assemble(
            data.vocab_src,
            data.vocab_tgt,
            data.alpha,
            data.embed_dim,
            data.embed_seed,
            counts,
        ))
    }

    fn embedding(&self, id: u32) -> &[f64] {
        &self.embeddings[id as usize]
    }

    /// Deterministic hidden state for `(source, prefix)`: the mean source
    /// embedding concatenated with the mean of the last two prefix-token
    /// embeddings, sent through a fixed seeded projection.
    pub fn hidden_state(&self, source_ids: &[u32], prefix: &[u32]) -> Result<Vec<f32>> {
        if source_ids.is_empty() {
            return Err(Error::invalid("empty source"));
        }
        if prefix.first() != Some(&BOS) {
            return Err(Error::invalid("prefix must begin with <bos>"));
        }
        let dim = self.embed_dim;
        let mut summary = vec![0.0f64; 2 * dim];
        for &id in source_ids {
            for (d, &x) in self.embedding(id).iter().enumerate() {
                summary[d] += x;
            }
        }
        for s in &mut summary[..dim] {
            *s /= source_ids.len() as f64;
        }
        let ctx_start = prefix.len().saturating_sub(2);
        let ctx = &prefix[ctx_start..];
        for &id in ctx {
            for (d, &x) in self.embedding(id).iter().enumerate() {
                summary[dim + d] += x;
            }
        }
        for s in &mut summary[dim..] {
            *s /= ctx.len() as f64;
        }
        let hidden = (0..dim)
            .map(|row| {
                let mut acc = 0.0f64;
                for (col, &s) in summary.iter().enumerate() {
                    acc += self.projection[row * 2 * dim + col] * s;
                }
                acc as f32
            })
            .collect();
        Ok(hidden)
    }

    /// Smoothed conditional distribution plus the hidden state.
    pub fn step(&self, source_ids: &[u32], prefix: &[u32]) -> Result<StepOutput> {
        let hidden = self.hidden_state(source_ids, prefix)?;
        let bucket = source_bucket(source_ids);
        let prev1 = *prefix.last().expect("prefix begins with bos");
        let prev2 = if prefix.len() >= 2 {
            prefix[prefix.len() - 2]
        } else {
            PAD
        };
        let vocab = self.vocab_tgt.len();
        let mut probs = vec![self.alpha; vocab];
        let mut total = self.alpha * vocab as f64;
        if let Some(row) = self.counts.get(&(bucket, prev2, prev1)) {
            for (&tok, &c) in row {
                probs[tok as usize] += c as f64;
                total += c as f64;
            }
        }
        for p in &mut probs {
            *p /= total;
        }
        let p_mt = TokenDistribution::new(probs)
            .map_err(|e| Error::Internal(format!("model produced a bad distribution: {e}")))?;
        Ok(StepOutput { p_mt, hidden })
    }

    /// Feeds a corpus through the model, yielding one `(hidden, token)`
    /// datastore entry per target token, end-of-sentence included.
    pub fn datastore_entries<S: AsRef<str>>(
        &self,
        sources: &[S],
        targets: &[S],
    ) -> Result<Vec<(Vec<f32>, u32)>> {
        if sources.len() != targets.len() {
            return Err(Error::invalid("corpus sides have different lengths"));
        }
        let mut entries = Vec::new();
        for (src, tgt) in sources.iter().zip(targets.iter()) {
            let src_ids = self.vocab_src.encode(src.as_ref());
            let mut y = vec![BOS];
            y.extend(self.vocab_tgt.encode(tgt.as_ref()));
            y.push(EOS);
            for i in 1..y.len() {
                let hidden = self.hidden_state(&src_ids, &y[..i])?;
                entries.push((hidden, y[i]));
            }
        }
        Ok(entries)
    }
}

fn projection_matrix(dim: usize, seed: u64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = stream(seed, Purpose::Projection, &[dim as u64]);
    let scale = 1.0 / ((2 * dim) as f64).sqrt();
    (0..dim * 2 * dim)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x * scale
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> TableModel {
        let sources = ["der hund läuft", "die katze schläft"];
        let targets = ["the dog runs", "the cat sleeps"];
        TableModel::train(&sources, &targets, 0.1, 16, 7).unwrap()
    }

    #[test]
    fn embeddings_are_deterministic_and_unit_norm() {
        let a = token_embedding(12, 32, 99);
        let b = token_embedding(12, 32, 99);
        assert_eq!(a, b);
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert_ne!(a, token_embedding(13, 32, 99));
    }

    #[test]
    fn embeddings_are_nearly_orthogonal() {
        // 100-token spot check at dim 32. Random unit vectors have cosine
        // spread ~ 1/sqrt(dim), so an occasional pair exceeds 0.5; require
        // 99% of pairs below it and a small mean.
        let dim = 32;
        let embs: Vec<Vec<f64>> = (0..100).map(|id| token_embedding(id, dim, 5)).collect();
        let mut total = 0usize;
        let mut above = 0usize;
        let mut sum_abs = 0.0f64;
        for i in 0..embs.len() {
            for j in (i + 1)..embs.len() {
                let cos: f64 = embs[i].iter().zip(embs[j].iter()).map(|(a, b)| a * b).sum();
                total += 1;
                sum_abs += cos.abs();
                if cos.abs() >= 0.5 {
                    above += 1;
                }
            }
        }
        assert!(
            above as f64 <= 0.01 * total as f64,
            "{above}/{total} pairs above 0.5"
        );
        assert!(sum_abs / (total as f64) < 0.25);
    }

    #[test]
    fn vocab_reserved_ids_are_fixed() {
        let v = Vocab::from_sentences(["b a"]);
        assert_eq!(v.id("<pad>"), PAD);
        assert_eq!(v.id("<bos>"), BOS);
        assert_eq!(v.id("<eos>"), EOS);
        assert_eq!(v.id("<unk>"), UNK);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.id("missing"), UNK);
        assert_eq!(v.token(5), "b");
    }

    #[test]
    fn hidden_state_is_deterministic() {
        let m = tiny_model();
        let src = m.vocab_src.encode("der hund läuft");
        let prefix = [BOS, m.vocab_tgt.id("the")];
        assert_eq!(
            m.hidden_state(&src, &prefix).unwrap(),
            m.hidden_state(&src, &prefix).unwrap()
        );
    }

    #[test]
    fn hidden_state_depends_on_last_token() {
        let m = tiny_model();
        let src = m.vocab_src.encode("der hund läuft");
        let a = m.hidden_state(&src, &[BOS, m.vocab_tgt.id("the")]).unwrap();
        let b = m.hidden_state(&src, &[BOS, m.vocab_tgt.id("dog")]).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn hidden_state_rejects_empty_source_and_missing_bos() {
        let m = tiny_model();
        assert!(m.hidden_state(&[], &[BOS]).is_err());
        assert!(m.hidden_state(&[4], &[5]).is_err());
    }

    #[test]
    fn step_distribution_sums_to_one() {
        let m = tiny_model();
        let src = m.vocab_src.encode("der hund läuft");
        let out = m.step(&src, &[BOS]).unwrap();
        let sum: f64 = out.p_mt.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn memorized_pair_is_reproduced_by_argmax() {
        let sources = ["der hund läuft", "die katze schläft"];
        let targets = ["the dog runs", "the cat sleeps"];
        let m = TableModel::train(&sources, &targets, 1e-6, 16, 7).unwrap();
        let src = m.vocab_src.encode(sources[0]);
        let mut y = vec![BOS];
        let expected: Vec<u32> = {
            let mut e = m.vocab_tgt.encode(targets[0]);
            e.push(EOS);
            e
        };
        for &want in &expected {
            let out = m.step(&src, &y).unwrap();
            assert_eq!(out.p_mt.argmax(), want);
            y.push(want);
        }
    }

    #[test]
    fn unseen_context_falls_back_to_uniform() {
        let m = tiny_model();
        let src = m.vocab_src.encode("der hund läuft");
        // a context never observed in training
        let out = m.step(&src, &[BOS, EOS, EOS]).unwrap();
        let v = m.vocab_tgt.len() as f64;
        for &p in out.p_mt.probs() {
            assert!((p - 1.0 / v).abs() < 1e-12);
        }
    }

    #[test]
    fn different_sources_give_different_distributions() {
        let m = tiny_model();
        // after "the", one source continues "dog", the other "cat"
        let prefix = [BOS, m.vocab_tgt.id("the")];
        let a = m
            .step(&m.vocab_src.encode("der hund läuft"), &prefix)
            .unwrap();
        let b = m
            .step(&m.vocab_src.encode("die katze schläft"), &prefix)
            .unwrap();
        assert_ne!(a.p_mt, b.p_mt);
        assert_eq!(a.p_mt.argmax(), m.vocab_tgt.id("dog"));
        assert_eq!(b.p_mt.argmax(), m.vocab_tgt.id("cat"));
    }

    #[test]
    fn training_is_deterministic() {
        let sources = ["a b", "c d"];
        let targets = ["x y", "z w"];
        let m1 = TableModel::train(&sources, &targets, 0.1, 8, 3).unwrap();
        let m2 = TableModel::train(&sources, &targets, 0.1, 8, 3).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn repeated_pair_scales_counts() {
        let alpha = 0.5;
        let once = TableModel::train(&["s"], &["t"], alpha, 8, 3).unwrap();
        let ten_src = vec!["s"; 10];
        let ten_tgt = vec!["t"; 10];
        let ten = TableModel::train(&ten_src, &ten_tgt, alpha, 8, 3).unwrap();
        let src = once.vocab_src.encode("s");
        let t_id = once.vocab_tgt.id("t");
        let v = once.vocab_tgt.len() as f64;
        let p_once = once.step(&src, &[BOS]).unwrap().p_mt.prob(t_id);
        let p_ten = ten.step(&src, &[BOS]).unwrap().p_mt.prob(t_id);
        // closed-form add-alpha values
        assert!((p_once - (1.0 + alpha) / (1.0 + alpha * v)).abs() < 1e-12);
        assert!((p_ten - (10.0 + alpha) / (10.0 + alpha * v)).abs() < 1e-12);
        assert!(p_ten > p_once);
    }

    #[test]
    fn mismatched_corpus_sides_are_rejected() {
        assert!(TableModel::train(&["a", "b"], &["x"], 0.1, 8, 3).is_err());
    }

    #[test]
    fn datastore_entries_count_target_tokens_with_eos() {
        let m = tiny_model();
        let sources = ["der hund läuft", "die katze schläft"];
        // target lengths 3+1 and 3+1 including eos
        let entries = m
            .datastore_entries(&sources, &["the dog runs", "the cat sleeps"])
            .unwrap();
        assert_eq!(entries.len(), 8);
    }

    #[test]
    fn model_data_round_trips() {
        let m = tiny_model();
        let data = m.to_data();
        let json = serde_json::to_string(&data).unwrap();
        let back = TableModel::from_data(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
