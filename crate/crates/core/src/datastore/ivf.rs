//! Inverted-file index: Lloyd k-means over the datastore keys, posting
//! lists per cluster, and search restricted to the `n_probe` clusters whose
//! centroids are closest to the query.
//!
//! Initialization is fully deterministic: the first centroid is the key at
//! index `seed mod n`, the rest are chosen farthest-point style (argmax of
//! the min squared distance to the already-chosen set, ties to the lowest
//! key index). Assignment ties always break to the lowest cluster id.

use super::{squared_l2_unchecked, Datastore, NeighborSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    dim: usize,
    n_clusters: usize,
    /// Concatenated centroid vectors, `dim` components each.
    centroids: Vec<f32>,
    /// Cluster id per datastore key.
    assignments: Vec<u32>,
    /// Key indices per cluster, ascending within each list.
    posting_lists: Vec<Vec<usize>>,
}

impl IvfIndex {
    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, cluster: usize) -> &[f32] {
        &self.centroids[cluster * self.dim..(cluster + 1) * self.dim]
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn posting_list(&self, cluster: usize) -> &[usize] {
        &self.posting_lists[cluster]
    }

    pub(crate) fn from_parts(
        dim: usize,
        n_clusters: usize,
        centroids: Vec<f32>,
        assignments: Vec<u32>,
    ) -> Result<Self> {
        if centroids.len() != n_clusters * dim {
            return Err(Error::invalid("centroid buffer size mismatch"));
        }
        let mut posting_lists = vec![Vec::new(); n_clusters];
        for (key_index, &cluster) in assignments.iter().enumerate() {
            let cluster = cluster as usize;
            if cluster >= n_clusters {
                return Err(Error::invalid(format!(
                    "assignment {cluster} out of range for {n_clusters} clusters"
                )));
            }
            posting_lists[cluster].push(key_index);
        }
        Ok(IvfIndex {
            dim,
            n_clusters,
            centroids,
            assignments,
            posting_lists,
        })
    }
}

/// Runs seeded Lloyd k-means over the datastore keys and builds the index.
pub fn build_ivf(
    ds: &Datastore,
    n_clusters: usize,
    max_iters: usize,
    seed: u64,
) -> Result<IvfIndex> {
    if n_clusters == 0 {
        return Err(Error::invalid("n_clusters must be >= 1"));
    }
    if n_clusters > ds.len() {
        return Err(Error::invalid(format!(
            "n_clusters {} exceeds datastore size {}",
            n_clusters,
            ds.len()
        )));
    }
    let dim = ds.dim();
    let n = ds.len();

    // Farthest-point init from a seed-picked first key.
    let first = (seed % n as u64) as usize;
    let mut centroid_ids = vec![first];
    let mut min_dist: Vec<f64> = (0..n)
        .map(|i| squared_l2_unchecked(ds.key(i), ds.key(first)))
        .collect();
    while centroid_ids.len() < n_clusters {
        let mut best = 0usize;
        for i in 1..n {
            if min_dist[i] > min_dist[best] {
                best = i;
            }
        }
        centroid_ids.push(best);
        for (i, slot) in min_dist.iter_mut().enumerate() {
            let d = squared_l2_unchecked(ds.key(i), ds.key(best));
            if d < *slot {
                *slot = d;
            }
        }
    }
    let mut centroids: Vec<f32> = Vec::with_capacity(n_clusters * dim);
    for &id in &centroid_ids {
        centroids.extend_from_slice(ds.key(id));
    }

    let mut assignments = vec![0u32; n];
    for _ in 0..max_iters.max(1) {
        let new_assignments = assign_all(ds, &centroids, n_clusters);
        let converged = new_assignments == assignments;
        assignments = new_assignments;

        // Recompute centroids as cluster means (f64 accumulation). Clusters
        // that end up empty keep their previous centroid.
        let mut sums = vec![0.0f64; n_clusters * dim];
        let mut counts = vec![0usize; n_clusters];
        for (i, &a) in assignments.iter().enumerate() {
            let a = a as usize;
            counts[a] += 1;
            for (d, &c) in ds.key(i).iter().enumerate() {
                sums[a * dim + d] += c as f64;
            }
        }
        for c in 0..n_clusters {
            if counts[c] > 0 {
                for d in 0..dim {
                    centroids[c * dim + d] = (sums[c * dim + d] / counts[c] as f64) as f32;
                }
            }
        }
        if converged {
            break;
        }
    }
    // Final assignment pass so assignments match the final centroids.
    let assignments = assign_all(ds, &centroids, n_clusters);
    IvfIndex::from_parts(dim, n_clusters, centroids, assignments)
}

fn assign_all(ds: &Datastore, centroids: &[f32], n_clusters: usize) -> Vec<u32> {
    let dim = ds.dim();
    (0..ds.len())
        .map(|i| {
            let key = ds.key(i);
            let mut best = 0usize;
            let mut best_dist = squared_l2_unchecked(key, &centroids[0..dim]);
            for c in 1..n_clusters {
                let d = squared_l2_unchecked(key, &centroids[c * dim..(c + 1) * dim]);
                if d < best_dist {
                    best = c;
                    best_dist = d;
                }
            }
            best as u32
        })
        .collect()
}

/// Exact search restricted to the union of the `n_probe` posting lists whose
/// centroids are closest to the query. Same ordering rules as
/// [`Datastore::search_exact`].
pub fn search_ivf(
    ds: &Datastore,
    index: &IvfIndex,
    query: &[f32],
    k: usize,
    n_probe: usize,
) -> Result<NeighborSet> {
    if query.len() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            got: query.len(),
        });
    }
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if n_probe == 0 || n_probe > index.n_clusters() {
        return Err(Error::invalid(format!(
            "n_probe {} out of range 1..={}",
            n_probe,
            index.n_clusters()
        )));
    }
    if ds.len() != index.assignments().len() {
        return Err(Error::invalid(
            "index was not built over this datastore (size mismatch)",
        ));
    }

    // Rank clusters by (centroid distance, cluster id).
    let mut by_dist: Vec<(f64, usize)> = (0..index.n_clusters())
        .map(|c| (squared_l2_unchecked(index.centroid(c), query), c))
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let candidates = by_dist[..n_probe]
        .iter()
        .flat_map(|&(_, c)| index.posting_list(c).iter().copied());
    Ok(ds.search_indices(query, k, candidates))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two well-separated blobs of 50 keys each, dim 4.
    fn two_blobs() -> Datastore {
        let mut pairs: Vec<(Vec<f32>, u32)> = Vec::new();
        for i in 0..50 {
            let jitter = (i % 10) as f32 * 0.01;
            pairs.push((vec![jitter, 0.1 * (i as f32 % 5.0), jitter, 0.0], 1));
        }
        for i in 0..50 {
            let jitter = (i % 10) as f32 * 0.01;
            pairs.push((
                vec![
                    100.0 + jitter,
                    100.0,
                    100.0 - jitter,
                    100.0 + 0.1 * (i as f32 % 7.0),
                ],
                2,
            ));
        }
        Datastore::build(pairs, 4, 8).unwrap()
    }

    #[test]
    fn blobs_split_into_their_own_clusters() {
        let ds = two_blobs();
        let index = build_ivf(&ds, 2, 25, 42).unwrap();
        for cluster in 0..2 {
            let list = index.posting_list(cluster);
            assert_eq!(list.len(), 50);
            // every member of a posting list comes from the same blob
            let all_low = list.iter().all(|&i| i < 50);
            let all_high = list.iter().all(|&i| i >= 50);
            assert!(all_low || all_high);
        }
    }

    #[test]
    fn single_cluster_holds_every_key() {
        let ds = two_blobs();
        let index = build_ivf(&ds, 1, 10, 0).unwrap();
        assert_eq!(index.posting_list(0).len(), ds.len());
    }

    #[test]
    fn duplicate_keys_cluster_without_losing_entries() {
        // more clusters than distinct keys: farthest-point init repeats
        // duplicates, some clusters end up empty, every key stays indexed
        let pairs: Vec<(Vec<f32>, u32)> =
            (0..12).map(|i| (vec![(i % 3) as f32, 0.0], 0u32)).collect();
        let ds = Datastore::build(pairs, 2, 4).unwrap();
        let index = build_ivf(&ds, 8, 20, 5).unwrap();
        let total: usize = (0..8).map(|c| index.posting_list(c).len()).sum();
        assert_eq!(total, 12);
        // full probe still equals exact search
        let exact = ds.search_exact(&[1.0, 0.0], 5).unwrap();
        let ivf = search_ivf(&ds, &index, &[1.0, 0.0], 5, 8).unwrap();
        assert_eq!(exact, ivf);
    }

    #[test]
    fn one_cluster_per_key_when_counts_match() {
        let pairs: Vec<(Vec<f32>, u32)> =
            (0..6).map(|i| (vec![i as f32 * 10.0, 0.0], 0u32)).collect();
        let ds = Datastore::build(pairs, 2, 4).unwrap();
        let index = build_ivf(&ds, 6, 20, 3).unwrap();
        for c in 0..6 {
            assert_eq!(index.posting_list(c).len(), 1);
        }
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let ds = two_blobs();
        assert!(matches!(
            build_ivf(&ds, 101, 10, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn full_probe_equals_exact() {
        let ds = two_blobs();
        let index = build_ivf(&ds, 5, 25, 7).unwrap();
        let query = vec![50.0f32, 40.0, 60.0, 50.0];
        let exact = ds.search_exact(&query, 9).unwrap();
        let ivf = search_ivf(&ds, &index, &query, 9, 5).unwrap();
        assert_eq!(exact, ivf);
    }

    #[test]
    fn single_probe_stays_in_the_near_blob() {
        let ds = two_blobs();
        let index = build_ivf(&ds, 2, 25, 42).unwrap();
        let query = vec![0.05f32, 0.2, 0.05, 0.0]; // inside blob A
        let ns = search_ivf(&ds, &index, &query, 10, 1).unwrap();
        assert_eq!(ns.len(), 10);
        assert!(ns.iter().all(|n| n.key_index < 50));
    }

    #[test]
    fn k_beyond_probed_population_returns_probed_only() {
        let ds = two_blobs();
        let index = build_ivf(&ds, 2, 25, 42).unwrap();
        let query = vec![0.0f32; 4];
        let ns = search_ivf(&ds, &index, &query, 500, 1).unwrap();
        assert_eq!(ns.len(), 50);
    }

    #[test]
    fn build_is_deterministic_in_seed() {
        let ds = two_blobs();
        let a = build_ivf(&ds, 4, 25, 9).unwrap();
        let b = build_ivf(&ds, 4, 25, 9).unwrap();
        assert_eq!(a, b);
    }
}
