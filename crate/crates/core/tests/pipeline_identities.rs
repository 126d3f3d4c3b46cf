//! Degeneracy identities over full decode outputs on the generated corpus:
//! each degenerate configuration must reproduce its reference pipeline
//! bit-for-bit, for every decoder.

use knndiv_core::corpus::{generate, GenSpec};
use knndiv_core::datastore::{build_ivf, Datastore};
use knndiv_core::decode::{CandidateList, DecodeConfig, DecoderKind, Pipeline, Searcher};
use knndiv_core::perturb::PerturbConfig;
use knndiv_core::scoring::ScoreConfig;
use knndiv_core::toymodel::TableModel;

struct World {
    model: TableModel,
    ds: Datastore,
    test_sources: Vec<String>,
}

fn world() -> World {
    let spec = GenSpec {
        n_train: 60,
        n_valid: 10,
        n_test: 6,
        two_refs: false,
        n_pool: 30,
    };
    let g = generate(&spec, 21).unwrap();
    let sources: Vec<&str> = g.train.sources();
    let targets: Vec<&str> = g.train.targets();
    let model = TableModel::train(&sources, &targets, 0.1, 16, 3).unwrap();
    let entries = model.datastore_entries(&sources, &targets).unwrap();
    let ds = Datastore::build(entries, 16, model.vocab_tgt.len() as u32).unwrap();
    World {
        model,
        ds,
        test_sources: g.test.sources().iter().map(|s| s.to_string()).collect(),
    }
}

fn base_config(decoder: DecoderKind, seed: u64) -> DecodeConfig {
    DecodeConfig {
        decoder,
        beam_size: 6,
        dbs_groups: 3,
        diversity_strength: 0.5,
        nucleus_p: 0.8,
        k: 4,
        score: ScoreConfig {
            tau: 1.0,
            lambda: 0.5,
            uniquify: false,
        },
        perturb: PerturbConfig::None,
        max_len: 10,
        seed,
    }
}

fn decode_all(world: &World, cfg: &DecodeConfig) -> Vec<CandidateList> {
    let pipeline = Pipeline::new(&world.model, &world.ds, Searcher::Exact, cfg).unwrap();
    world
        .test_sources
        .iter()
        .enumerate()
        .map(|(i, src)| {
            pipeline
                .decode(&world.model.vocab_src.encode(src), i as u64)
                .unwrap()
        })
        .collect()
}

#[test]
fn zero_noise_equals_vanilla_for_every_decoder_and_seed() {
    let w = world();
    for decoder in [DecoderKind::Beam, DecoderKind::Dbs, DecoderKind::Nucleus] {
        for seed in [1u64, 99] {
            let vanilla = base_config(decoder, seed);
            let mut noised = vanilla.clone();
            noised.perturb = PerturbConfig::StaticNoise { h_m: 0.0, h_s: 0.0 };
            assert_eq!(decode_all(&w, &vanilla), decode_all(&w, &noised));
        }
    }
}

#[test]
fn boundary_randomize_equals_vanilla_for_every_decoder_and_seed() {
    let w = world();
    for decoder in [DecoderKind::Beam, DecoderKind::Dbs, DecoderKind::Nucleus] {
        for seed in [2u64, 42] {
            let vanilla = base_config(decoder, seed);
            let mut randomized = vanilla.clone();
            // floor(1.2 * 4) == 4: fetch exactly k, keep all
            randomized.perturb = PerturbConfig::Randomize { h: 1.2 };
            assert_eq!(decode_all(&w, &vanilla), decode_all(&w, &randomized));
        }
    }
}

#[test]
fn lambda_zero_equals_pure_toy_model() {
    let w = world();
    for decoder in [DecoderKind::Beam, DecoderKind::Dbs, DecoderKind::Nucleus] {
        let mut plain = base_config(decoder, 7);
        plain.score.lambda = 0.0;
        // an aggressively perturbed pipeline, all discarded at lambda = 0
        let mut perturbed = plain.clone();
        perturbed.perturb = PerturbConfig::Randomize { h: 3.0 };
        assert_eq!(decode_all(&w, &plain), decode_all(&w, &perturbed));
    }
}

#[test]
fn dbs_single_group_equals_beam() {
    let w = world();
    for seed in [3u64, 17] {
        let mut beam = base_config(DecoderKind::Beam, seed);
        beam.perturb = PerturbConfig::Randomize { h: 2.5 };
        let mut dbs = beam.clone();
        dbs.decoder = DecoderKind::Dbs;
        dbs.dbs_groups = 1;
        assert_eq!(decode_all(&w, &beam), decode_all(&w, &dbs));
    }
}

#[test]
fn nucleus_below_max_prob_equals_greedy() {
    let w = world();
    let mut greedy = base_config(DecoderKind::Beam, 5);
    greedy.beam_size = 1;
    let mut nucleus = base_config(DecoderKind::Nucleus, 5);
    nucleus.nucleus_p = 1e-12;
    let greedy_out = decode_all(&w, &greedy);
    let nucleus_out = decode_all(&w, &nucleus);
    for (g, n) in greedy_out.iter().zip(nucleus_out.iter()) {
        for hyp in &n.hypotheses {
            assert_eq!(hyp.tokens, g.hypotheses[0].tokens);
            assert!((hyp.logprob - g.hypotheses[0].logprob).abs() < 1e-12);
        }
    }
}

#[test]
fn ivf_full_probe_pipeline_equals_exact_pipeline() {
    let w = world();
    let index = build_ivf(&w.ds, 8, 20, 7).unwrap();
    let cfg = base_config(DecoderKind::Dbs, 11);
    let exact = decode_all(&w, &cfg);
    let pipeline = Pipeline::new(
        &w.model,
        &w.ds,
        Searcher::Ivf {
            index: &index,
            n_probe: 8,
        },
        &cfg,
    )
    .unwrap();
    let ivf: Vec<CandidateList> = w
        .test_sources
        .iter()
        .enumerate()
        .map(|(i, src)| {
            pipeline
                .decode(&w.model.vocab_src.encode(src), i as u64)
                .unwrap()
        })
        .collect();
    assert_eq!(exact, ivf);
}

#[test]
fn adaptive_noise_with_zero_multipliers_equals_vanilla() {
    let w = world();
    let vanilla = base_config(DecoderKind::Dbs, 23);
    let mut adaptive = vanilla.clone();
    adaptive.perturb = PerturbConfig::AdaptiveNoise {
        h_m_mult: 0.0,
        h_s_mult: 0.0,
    };
    assert_eq!(decode_all(&w, &vanilla), decode_all(&w, &adaptive));
}

#[test]
fn decode_is_independent_of_sentence_order() {
    let w = world();
    let mut cfg = base_config(DecoderKind::Dbs, 31);
    cfg.perturb = PerturbConfig::Randomize { h: 2.0 };
    let pipeline = Pipeline::new(&w.model, &w.ds, Searcher::Exact, &cfg).unwrap();
    let forward: Vec<CandidateList> = (0..w.test_sources.len())
        .map(|i| {
            pipeline
                .decode(&w.model.vocab_src.encode(&w.test_sources[i]), i as u64)
                .unwrap()
        })
        .collect();
    let mut backward: Vec<(usize, CandidateList)> = (0..w.test_sources.len())
        .rev()
        .map(|i| {
            (
                i,
                pipeline
                    .decode(&w.model.vocab_src.encode(&w.test_sources[i]), i as u64)
                    .unwrap(),
            )
        })
        .collect();
    backward.sort_by_key(|(i, _)| *i);
    let backward: Vec<CandidateList> = backward.into_iter().map(|(_, c)| c).collect();
    assert_eq!(forward, backward);
}

#[test]
fn self_retrieval_returns_a_zero_distance_neighbor() {
    let w = world();
    // every training context must find its own key at distance zero
    let spec = GenSpec {
        n_train: 60,
        n_valid: 10,
        n_test: 6,
        two_refs: false,
        n_pool: 30,
    };
    let g = generate(&spec, 21).unwrap();
    let (src, tgt) = &g.train.pairs[0];
    let src_ids = w.model.vocab_src.encode(src);
    let mut prefix = vec![knndiv_core::toymodel::BOS];
    prefix.extend(w.model.vocab_tgt.encode(tgt));
    for t in 1..prefix.len() {
        let hidden = w.model.hidden_state(&src_ids, &prefix[..t]).unwrap();
        let ns = w.ds.search_exact(&hidden, 1).unwrap();
        assert_eq!(ns.neighbors()[0].distance, 0.0);
    }
}

#[test]
fn out_of_vocabulary_sources_still_decode() {
    let w = world();
    let mut cfg = base_config(DecoderKind::Dbs, 3);
    cfg.perturb = PerturbConfig::Randomize { h: 2.0 };
    let pipeline = Pipeline::new(&w.model, &w.ds, Searcher::Exact, &cfg).unwrap();
    // tokens never seen in training map to <unk>
    let src = w.model.vocab_src.encode("zebra quark zebra");
    assert!(src.iter().all(|&t| t == knndiv_core::toymodel::UNK));
    let out = pipeline.decode(&src, 0).unwrap();
    assert_eq!(out.hypotheses.len(), cfg.beam_size);
    for hyp in &out.hypotheses {
        assert!(hyp.finished);
        assert!(hyp.logprob <= 0.0);
    }
}

#[test]
fn candidate_lists_always_hold_beam_size_hypotheses() {
    let w = world();
    for decoder in [DecoderKind::Beam, DecoderKind::Dbs, DecoderKind::Nucleus] {
        for beam_size in [1usize, 3, 6] {
            for perturb in [
                PerturbConfig::None,
                PerturbConfig::Randomize { h: 2.0 },
                PerturbConfig::StaticNoise { h_m: 0.2, h_s: 0.1 },
            ] {
                let mut cfg = base_config(decoder, 9);
                cfg.beam_size = beam_size;
                cfg.dbs_groups = cfg.dbs_groups.min(beam_size);
                cfg.perturb = perturb;
                for list in decode_all(&w, &cfg) {
                    assert_eq!(list.hypotheses.len(), beam_size);
                    for hyp in &list.hypotheses {
                        assert!(hyp.finished);
                        assert!(hyp.logprob <= 0.0);
                        assert_eq!(hyp.tokens[0], knndiv_core::toymodel::BOS);
                        // finished means eos or the length cap
                        let last = *hyp.tokens.last().unwrap();
                        assert!(
                            last == knndiv_core::toymodel::EOS
                                || hyp.tokens.len() - 1 == cfg.max_len
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn tiny_vocab_forces_flagged_padding() {
    // a single training pair gives a search tree narrower than the beam
    let sources = ["s"];
    let targets = ["t"];
    let model = TableModel::train(&sources, &targets, 0.1, 8, 3).unwrap();
    let ds = Datastore::build(
        model.datastore_entries(&sources, &targets).unwrap(),
        8,
        model.vocab_tgt.len() as u32,
    )
    .unwrap();
    let mut cfg = base_config(DecoderKind::Beam, 1);
    cfg.beam_size = 40; // wider than the number of reachable sequences
    cfg.max_len = 2;
    cfg.k = 2;
    let pipeline = Pipeline::new(&model, &ds, Searcher::Exact, &cfg).unwrap();
    let out = pipeline.decode(&model.vocab_src.encode("s"), 0).unwrap();
    assert!(out.padded);
    assert_eq!(out.hypotheses.len(), 40);
}
