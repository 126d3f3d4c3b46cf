//! Synthetic parallel corpora and the tab-separated corpus format.
//!
//! The generator instantiates templates whose slots carry a fixed source
//! form and a small set of target synonyms. Synonym choice is skewed
//! towards the head of each set, so trained count models end up with the
//! frequency imbalance that retrieval is supposed to counteract, while the
//! rarer synonyms still appear in the data (and hence in the datastore).
//!
//! Corpus files are UTF-8, one sentence pair per line, source and target
//! separated by a tab, tokens separated by single spaces.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// An aligned list of `(source, target)` sentence pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<(String, String)>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<&str> {
        self.pairs.iter().map(|(s, _)| s.as_str()).collect()
    }

    pub fn targets(&self) -> Vec<&str> {
        self.pairs.iter().map(|(_, t)| t.as_str()).collect()
    }

    /// Parses the tab-separated format. Line numbers in errors are 1-based.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (src, tgt) = line.split_once('\t').ok_or_else(|| {
                Error::invalid(format!("line {}: missing tab separator", lineno + 1))
            })?;
            if src.trim().is_empty() {
                return Err(Error::invalid(format!("line {}: empty source", lineno + 1)));
            }
            pairs.push((src.to_string(), tgt.to_string()));
        }
        Ok(ParallelCorpus { pairs })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (s, t) in &self.pairs {
            out.push_str(s);
            out.push('\t');
            out.push_str(t);
            out.push('\n');
        }
        out
    }
}

/// One template slot: a fixed source surface form and its target synonyms,
/// ordered from most to least frequent.
#[derive(Debug, Clone)]
pub struct Meaning {
    pub src: &'static str,
    pub tgts: &'static [&'static str],
}

/// A sentence template: each position is a class of interchangeable
/// meanings.
pub type Template = Vec<Vec<Meaning>>;

fn class(entries: &[(&'static str, &'static [&'static str])]) -> Vec<Meaning> {
    entries
        .iter()
        .map(|&(src, tgts)| Meaning { src, tgts })
        .collect()
}

/// The built-in template bank: around 90 target surface forms across ten
/// slot classes, sentence lengths 3..=6.
pub fn builtin_templates() -> Vec<Template> {
    let det: Vec<Meaning> = class(&[("der", &["the"])]);
    let det_a: Vec<Meaning> = class(&[("ein", &["a"])]);
    let animal: Vec<Meaning> = class(&[
        ("hund", &["dog", "hound"]),
        ("katze", &["cat", "kitty"]),
        ("vogel", &["bird", "fowl"]),
        ("pferd", &["horse", "steed"]),
        ("fuchs", &["fox"]),
        ("wolf", &["wolf"]),
    ]);
    let person: Vec<Meaning> = class(&[
        ("arzt", &["doctor", "physician"]),
        ("lehrer", &["teacher", "tutor"]),
        ("kind", &["child", "kid"]),
        ("mann", &["man", "fellow"]),
        ("frau", &["woman", "lady"]),
        ("bauer", &["farmer"]),
    ]);
    let place: Vec<Meaning> = class(&[
        ("haus", &["house", "home"]),
        ("wald", &["forest", "woods"]),
        ("fluss", &["river", "stream"]),
        ("berg", &["mountain", "peak"]),
        ("dorf", &["village"]),
        ("garten", &["garden", "yard"]),
    ]);
    let object: Vec<Meaning> = class(&[
        ("auto", &["car", "automobile"]),
        ("brot", &["bread", "loaf"]),
        ("buch", &["book"]),
        ("apfel", &["apple"]),
        ("stein", &["rock", "stone"]),
        ("korb", &["basket"]),
    ]);
    let verb_t: Vec<Meaning> = class(&[
        ("sieht", &["sees", "spots", "watches", "observes"]),
        ("jagt", &["chases", "hunts", "pursues", "stalks"]),
        ("findet", &["finds", "discovers"]),
        ("liebt", &["loves", "adores"]),
        ("frisst", &["eats", "devours"]),
        ("traegt", &["carries", "hauls"]),
    ]);
    let verb_i: Vec<Meaning> = class(&[
        ("laeuft", &["runs", "sprints"]),
        ("schlaeft", &["sleeps", "dozes"]),
        ("singt", &["sings", "chants"]),
        ("wartet", &["waits", "lingers"]),
        ("faellt", &["falls", "tumbles"]),
    ]);
    let adj: Vec<Meaning> = class(&[
        ("gross", &["big", "large", "huge", "grand"]),
        ("klein", &["small", "little", "tiny"]),
        ("alt", &["old", "ancient"]),
        ("schnell", &["fast", "quick", "rapid"]),
        ("rot", &["red", "crimson"]),
        ("still", &["quiet", "silent"]),
    ]);
    let adv: Vec<Meaning> = class(&[
        ("oft", &["often", "frequently"]),
        ("heute", &["today"]),
        ("gern", &["gladly", "happily"]),
        ("langsam", &["slowly"]),
        ("wieder", &["again"]),
    ]);
    let prep: Vec<Meaning> = class(&[("im", &["in"]), ("am", &["at"]), ("beim", &["near"])]);

    vec![
        vec![
            det.clone(),
            adj.clone(),
            animal.clone(),
            verb_t.clone(),
            det.clone(),
            object.clone(),
        ],
        vec![det.clone(), animal.clone(), verb_i.clone(), adv.clone()],
        vec![
            det.clone(),
            person.clone(),
            verb_t.clone(),
            det_a.clone(),
            object.clone(),
        ],
        vec![
            det.clone(),
            animal.clone(),
            verb_i.clone(),
            prep.clone(),
            det.clone(),
            place.clone(),
        ],
        vec![det.clone(), person.clone(), verb_i.clone(), adv.clone()],
        vec![
            det_a.clone(),
            adj.clone(),
            person.clone(),
            verb_t.clone(),
            det.clone(),
            animal.clone(),
        ],
        vec![
            det.clone(),
            animal.clone(),
            verb_t.clone(),
            det.clone(),
            animal.clone(),
        ],
        vec![
            det.clone(),
            person.clone(),
            verb_t.clone(),
            det.clone(),
            place.clone(),
        ],
        vec![det_a.clone(), animal.clone(), verb_i.clone()],
        vec![
            det.clone(),
            adj.clone(),
            object.clone(),
            verb_i.clone(),
            heute_only(&adv),
        ],
    ]
}

fn heute_only(adv: &[Meaning]) -> Vec<Meaning> {
    // fixed-adverb variant keeps one template fully deterministic on the
    // source side
    vec![adv[1].clone()]
}

/// Geometric skew over synonym alternatives; index 0 is the head form.
fn pick_synonym<R: Rng>(tgts: &[&'static str], rng: &mut R) -> &'static str {
    if tgts.len() == 1 {
        return tgts[0];
    }
    const RATIO: f64 = 0.45;
    let total: f64 = (0..tgts.len()).map(|i| RATIO.powi(i as i32)).sum();
    let mut u: f64 = rng.gen::<f64>() * total;
    for (i, t) in tgts.iter().enumerate() {
        let w = RATIO.powi(i as i32);
        if u < w || i == tgts.len() - 1 {
            return t;
        }
        u -= w;
    }
    tgts[tgts.len() - 1]
}

/// Requested split sizes and whether the test split carries a second
/// reference realization.
///
/// All splits draw their sentences from a shared pool of `n_pool` template
/// instantiations, so test sources are in-domain: the trained count model
/// has seen every test context, with synonym frequencies imbalanced by the
/// skewed realization. Rarer synonyms still sit in the datastore at
/// distance zero, which is the regime the retrieval perturbations target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    #[serde(default = "default_true")]
    pub two_refs: bool,
    #[serde(default = "default_pool")]
    pub n_pool: usize,
}

fn default_true() -> bool {
    true
}

fn default_pool() -> usize {
    80
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            n_train: 300,
            n_valid: 50,
            n_test: 120,
            two_refs: true,
            n_pool: default_pool(),
        }
    }
}

/// All generated splits. `test_refb` shares sources with `test` but
/// realizes the target synonyms independently.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    pub train: ParallelCorpus,
    pub valid: ParallelCorpus,
    pub test: ParallelCorpus,
    pub test_refb: Option<ParallelCorpus>,
}

/// Deterministically generates all splits for `(spec, seed)`.
pub fn generate(spec: &GenSpec, seed: u64) -> Result<GeneratedCorpus> {
    if spec.n_train == 0 {
        return Err(Error::invalid("n_train must be >= 1"));
    }
    if spec.n_pool == 0 {
        return Err(Error::invalid("n_pool must be >= 1"));
    }
    let templates = builtin_templates();

    // the shared pool of sentence meanings all splits draw from
    let pool: Vec<Vec<&Meaning>> = (0..spec.n_pool)
        .map(|i| {
            let mut rng = stream(seed, Purpose::CorpusGen, &[9, i as u64]);
            let template = &templates[rng.gen_range(0..templates.len())];
            template
                .iter()
                .map(|slot| &slot[rng.gen_range(0..slot.len())])
                .collect()
        })
        .collect();

    let gen_split = |tag: u64, n: usize, two_refs: bool| {
        let mut primary = Vec::with_capacity(n);
        let mut secondary = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = stream(seed, Purpose::CorpusGen, &[tag, i as u64]);
            let meanings = &pool[rng.gen_range(0..pool.len())];
            let source: Vec<&str> = meanings.iter().map(|m| m.src).collect();
            let ref_a: Vec<&str> = meanings
                .iter()
                .map(|m| pick_synonym(m.tgts, &mut rng))
                .collect();
            primary.push((source.join(" "), ref_a.join(" ")));
            if two_refs {
                // minimal paraphrase pair: one synonym slot swapped, so the
                // two references isolate a single likelihood decision
                let mut ref_b: Vec<&str> = ref_a.clone();
                let eligible: Vec<usize> = meanings
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| m.tgts.len() >= 2)
                    .map(|(i, _)| i)
                    .collect();
                if !eligible.is_empty() {
                    let slot = eligible[rng.gen_range(0..eligible.len())];
                    let alternatives: Vec<&str> = meanings[slot]
                        .tgts
                        .iter()
                        .copied()
                        .filter(|t| *t != ref_a[slot])
                        .collect();
                    ref_b[slot] = alternatives[rng.gen_range(0..alternatives.len())];
                }
                secondary.push((source.join(" "), ref_b.join(" ")));
            }
        }
        (
            ParallelCorpus { pairs: primary },
            ParallelCorpus { pairs: secondary },
        )
    };

    let (train, _) = gen_split(0, spec.n_train, false);
    let (valid, _) = gen_split(1, spec.n_valid, false);
    let (test, refb) = gen_split(2, spec.n_test, spec.two_refs);
    Ok(GeneratedCorpus {
        train,
        valid,
        test,
        test_refb: if spec.two_refs { Some(refb) } else { None },
    })
}

/// Convenience wrapper used by tests: a derived RNG for ad-hoc draws.
pub fn corpus_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    stream(seed, Purpose::CorpusGen, parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn parse_round_trips() {
        let text = "a b\tx y\nc\tz\n";
        let corpus = ParallelCorpus::parse(text).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.to_tsv(), text);
    }

    #[test]
    fn parse_rejects_missing_tab() {
        assert!(ParallelCorpus::parse("no separator here\n").is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GenSpec::default();
        assert_eq!(generate(&spec, 11).unwrap(), generate(&spec, 11).unwrap());
        assert_ne!(generate(&spec, 11).unwrap(), generate(&spec, 12).unwrap());
    }

    #[test]
    fn split_sizes_are_honored_exactly() {
        let spec = GenSpec {
            n_train: 17,
            n_valid: 5,
            n_test: 9,
            two_refs: true,
            n_pool: 24,
        };
        let g = generate(&spec, 3).unwrap();
        assert_eq!(g.train.len(), 17);
        assert_eq!(g.valid.len(), 5);
        assert_eq!(g.test.len(), 9);
        assert_eq!(g.test_refb.as_ref().unwrap().len(), 9);
    }

    #[test]
    fn refb_shares_sources_and_mostly_differs() {
        let g = generate(&GenSpec::default(), 7).unwrap();
        let refb = g.test_refb.as_ref().unwrap();
        let mut differing = 0;
        for ((src_a, tgt_a), (src_b, tgt_b)) in g.test.pairs.iter().zip(refb.pairs.iter()) {
            assert_eq!(src_a, src_b);
            if tgt_a != tgt_b {
                differing += 1;
            }
        }
        assert!(
            differing > g.test.len() / 2,
            "only {differing} pairs differ"
        );
    }

    #[test]
    fn target_vocabulary_is_large_enough() {
        let g = generate(&GenSpec::default(), 1).unwrap();
        let types: BTreeSet<&str> = g
            .train
            .pairs
            .iter()
            .flat_map(|(_, t)| t.split_whitespace())
            .collect();
        assert!(types.len() >= 50, "only {} target types", types.len());
    }

    #[test]
    fn test_sources_are_mostly_in_domain() {
        // splits share the meaning pool, so the trained model has seen
        // nearly every test source
        let g = generate(&GenSpec::default(), 4).unwrap();
        let train_sources: BTreeSet<&str> = g.train.pairs.iter().map(|(s, _)| s.as_str()).collect();
        let seen = g
            .test
            .pairs
            .iter()
            .filter(|(s, _)| train_sources.contains(s.as_str()))
            .count();
        assert!(
            seen * 10 >= g.test.len() * 9,
            "only {seen}/{} test sources seen in training",
            g.test.len()
        );
    }

    #[test]
    fn synonym_skew_prefers_the_head_form() {
        let mut rng = corpus_rng(5, &[99]);
        let tgts: &[&str] = &["alpha", "beta"];
        let mut head = 0;
        for _ in 0..10_000 {
            if pick_synonym(tgts, &mut rng) == "alpha" {
                head += 1;
            }
        }
        let freq = head as f64 / 10_000.0;
        // expected 1/1.45 ~ 0.69
        assert!((freq - 0.69).abs() < 0.03, "head frequency {freq}");
    }
}
