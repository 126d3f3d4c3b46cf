//! Search correctness against an independently coded brute-force oracle,
//! plus persistence round-trips.

use knndiv_core::datastore::{build_ivf, search_ivf, Datastore, IvfIndex, Neighbor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// O(n log n) oracle: compute every distance the straightforward way and
/// fully sort. Deliberately shares no code with the search path.
fn brute_force_knn(ds: &Datastore, query: &[f32], k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = (0..ds.len())
        .map(|i| {
            let key = ds.key(i);
            let mut dist = 0.0f64;
            for d in 0..key.len() {
                let delta = key[d] as f64 - query[d] as f64;
                dist += delta * delta;
            }
            Neighbor {
                distance: dist,
                key_index: i,
                token: ds.value(i),
            }
        })
        .collect();
    all.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.key_index.cmp(&b.key_index))
    });
    all.truncate(k);
    all
}

fn random_store(rng: &mut ChaCha8Rng, n: usize, dim: usize, vocab: u32) -> Datastore {
    let pairs: Vec<(Vec<f32>, u32)> = (0..n)
        .map(|_| {
            let key: Vec<f32> = (0..dim).map(|_| rng.gen_range(-4.0f32..4.0)).collect();
            (key, rng.gen_range(0..vocab))
        })
        .collect();
    Datastore::build(pairs, dim, vocab).unwrap()
}

#[test]
fn exact_search_matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    for _ in 0..60 {
        let n = rng.gen_range(1..400);
        let dim = rng.gen_range(1..24);
        let k = rng.gen_range(1..32);
        let ds = random_store(&mut rng, n, dim, 64);
        let query: Vec<f32> = (0..dim).map(|_| rng.gen_range(-4.0f32..4.0)).collect();
        let got = ds.search_exact(&query, k).unwrap();
        let want = brute_force_knn(&ds, &query, k);
        assert_eq!(got.neighbors(), want.as_slice());
    }
}

#[test]
fn exact_search_matches_oracle_with_heavy_ties() {
    // quantized coordinates force many exactly-equal distances
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let n = rng.gen_range(5..200);
        let dim = rng.gen_range(1..4);
        let k = rng.gen_range(1..16);
        let pairs: Vec<(Vec<f32>, u32)> = (0..n)
            .map(|_| {
                let key: Vec<f32> = (0..dim).map(|_| rng.gen_range(-2i32..=2) as f32).collect();
                (key, rng.gen_range(0..8))
            })
            .collect();
        let ds = Datastore::build(pairs, dim, 8).unwrap();
        let query: Vec<f32> = (0..dim).map(|_| rng.gen_range(-2i32..=2) as f32).collect();
        let got = ds.search_exact(&query, k).unwrap();
        let want = brute_force_knn(&ds, &query, k);
        assert_eq!(got.neighbors(), want.as_slice());
    }
}

#[test]
fn ivf_full_probe_equals_exact_and_recall_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xabcd);
    for trial in 0..20 {
        let n = rng.gen_range(20..300);
        let dim = rng.gen_range(2..12);
        let n_clusters = rng.gen_range(1..=n.min(12));
        let ds = random_store(&mut rng, n, dim, 64);
        let index = build_ivf(&ds, n_clusters, 20, trial).unwrap();
        let query: Vec<f32> = (0..dim).map(|_| rng.gen_range(-4.0f32..4.0)).collect();
        let k = rng.gen_range(1..16);

        let exact = ds.search_exact(&query, k).unwrap();
        let full = search_ivf(&ds, &index, &query, k, n_clusters).unwrap();
        assert_eq!(exact, full);

        let truth: std::collections::HashSet<usize> = exact.iter().map(|nb| nb.key_index).collect();
        let mut prev_recall = 0.0f64;
        for n_probe in 1..=n_clusters {
            let got = search_ivf(&ds, &index, &query, k, n_probe).unwrap();
            let hit = got
                .iter()
                .filter(|nb| truth.contains(&nb.key_index))
                .count();
            let recall = hit as f64 / truth.len() as f64;
            assert!(
                recall >= prev_recall - 1e-12,
                "recall dropped from {prev_recall} to {recall} at n_probe {n_probe}"
            );
            prev_recall = recall;
        }
        assert!((prev_recall - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn prop_exact_matches_oracle(
        seed in 0u64..1_000,
        n in 1usize..120,
        dim in 1usize..10,
        k in 1usize..20,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_store(&mut rng, n, dim, 32);
        let query: Vec<f32> = (0..dim).map(|_| rng.gen_range(-4.0f32..4.0)).collect();
        let got = ds.search_exact(&query, k).unwrap();
        let want = brute_force_knn(&ds, &query, k);
        prop_assert_eq!(got.neighbors(), want.as_slice());
    }

    #[test]
    fn prop_save_load_is_identity(
        seed in 0u64..1_000,
        n in 0usize..80,
        dim in 1usize..10,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(Vec<f32>, u32)> = (0..n)
            .map(|_| {
                // exercise odd float values, not just round numbers
                let key: Vec<f32> = (0..dim).map(|_| f32::from_bits(rng.gen::<u32>() & 0x7f7f_ffff)).collect();
                (key, rng.gen_range(0..16))
            })
            .collect();
        let ds = Datastore::build(pairs, dim, 16).unwrap();
        let restored = Datastore::load(&ds.save()).unwrap();
        prop_assert_eq!(ds, restored);
    }

    #[test]
    fn prop_index_save_load_is_identity(
        seed in 0u64..300,
        n in 4usize..60,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_store(&mut rng, n, 3, 16);
        let n_clusters = rng.gen_range(1..=n.min(6));
        let index = build_ivf(&ds, n_clusters, 10, seed).unwrap();
        let restored = IvfIndex::load(&index.save()).unwrap();
        prop_assert_eq!(index, restored);
    }
}
