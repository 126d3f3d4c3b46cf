//! The key-value store of hidden-state vectors and target tokens, plus
//! exact nearest-neighbor search over it.
//!
//! Keys are stored as 32-bit floats (matching the on-disk format); all
//! distance arithmetic accumulates in 64-bit. Distances are squared L2 and
//! are never square-rooted — every distance-derived quantity elsewhere in
//! the crate (softmax temperatures, noise magnitudes, distance statistics)
//! is therefore in squared-distance units.

mod io;
mod ivf;

pub use ivf::{build_ivf, search_ivf, IvfIndex};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Token identifier in a vocabulary. `u32` covers any desk-scale vocab.
pub type TokenId = u32;

/// Squared L2 distance between two equal-length vectors.
pub fn squared_l2(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(squared_l2_unchecked(a, b))
}

#[inline]
pub(crate) fn squared_l2_unchecked(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    acc
}

/// One retrieved neighbor: its squared-L2 distance to the query, its index
/// into the datastore, and the target token stored there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub distance: f64,
    pub key_index: usize,
    pub token: TokenId,
}

/// Retrieval result for one query, sorted by `(distance, key_index)`
/// ascending, with no duplicate key index. The composite order makes every
/// downstream consumer deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborSet {
    neighbors: Vec<Neighbor>,
}

impl NeighborSet {
    /// Builds a set from arbitrary neighbors, enforcing the sort order.
    /// Duplicate key indices are a caller bug.
    pub fn new(mut neighbors: Vec<Neighbor>) -> Self {
        neighbors.sort_by(cmp_neighbors);
        debug_assert!(
            neighbors
                .windows(2)
                .all(|w| w[0].key_index != w[1].key_index),
            "duplicate key_index in NeighborSet"
        );
        NeighborSet { neighbors }
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self) -> &[Neighbor] {
        &self.neighbors
    }

    pub fn iter(&self) -> impl Iterator<Item = &Neighbor> {
        self.neighbors.iter()
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.neighbors.iter().map(|n| n.distance)
    }
}

pub(crate) fn cmp_neighbors(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then(a.key_index.cmp(&b.key_index))
}

/// Flat store of `(key vector, token id)` pairs in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Datastore {
    dim: usize,
    vocab_size: u32,
    /// All keys concatenated, `dim` components each.
    keys: Vec<f32>,
    values: Vec<TokenId>,
}

impl Datastore {
    /// Creates an empty datastore for the given key dimensionality and
    /// vocabulary size.
    pub fn new(dim: usize, vocab_size: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("datastore dim must be >= 1"));
        }
        if vocab_size == 0 {
            return Err(Error::invalid("vocab_size must be >= 1"));
        }
        Ok(Datastore {
            dim,
            vocab_size,
            keys: Vec::new(),
            values: Vec::new(),
        })
    }

    /// Builds a datastore from `(key, token)` pairs, preserving order.
    pub fn build<K: AsRef<[f32]>>(
        pairs: impl IntoIterator<Item = (K, TokenId)>,
        dim: usize,
        vocab_size: u32,
    ) -> Result<Self> {
        let mut ds = Datastore::new(dim, vocab_size)?;
        for (key, token) in pairs {
            ds.push(key.as_ref(), token)?;
        }
        Ok(ds)
    }

    /// Appends one entry. Fails on wrong dimensionality, non-finite
    /// components, or out-of-vocabulary tokens.
    pub fn push(&mut self, key: &[f32], token: TokenId) -> Result<()> {
        if key.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: key.len(),
            });
        }
        if key.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("key vector has non-finite component"));
        }
        if token >= self.vocab_size {
            return Err(Error::invalid(format!(
                "token {token} out of range for vocab_size {}",
                self.vocab_size
            )));
        }
        self.keys.extend_from_slice(key);
        self.values.push(token);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn key(&self, index: usize) -> &[f32] {
        &self.keys[index * self.dim..(index + 1) * self.dim]
    }

    pub fn value(&self, index: usize) -> TokenId {
        self.values[index]
    }

    pub fn values(&self) -> &[TokenId] {
        &self.values
    }

    /// Exact k-nearest-neighbor search: the `min(k, len)` entries with the
    /// globally smallest squared-L2 distance to `query`, ties broken by
    /// ascending key index.
    pub fn search_exact(&self, query: &[f32], k: usize) -> Result<NeighborSet> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        Ok(self.search_indices(query, k, (0..self.len()).into_iter()))
    }

    /// Exact search restricted to `candidates` (assumed valid indices, any
    /// order, no duplicates).
    pub(crate) fn search_indices(
        &self,
        query: &[f32],
        k: usize,
        candidates: impl Iterator<Item = usize>,
    ) -> NeighborSet {
        // Max-heap of the current k best; the root is the worst kept entry.
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
        for idx in candidates {
            let dist = squared_l2_unchecked(self.key(idx), query);
            if heap.len() < k {
                heap.push(HeapEntry { dist, idx });
            } else if let Some(worst) = heap.peek() {
                // smaller (dist, idx) wins
                if dist.total_cmp(&worst.dist).then(idx.cmp(&worst.idx)) == Ordering::Less {
                    heap.pop();
                    heap.push(HeapEntry { dist, idx });
                }
            }
        }
        let neighbors = heap
            .into_iter()
            .map(|e| Neighbor {
                distance: e.dist,
                key_index: e.idx,
                token: self.values[e.idx],
            })
            .collect();
        NeighborSet::new(neighbors)
    }
}

#[derive(Debug)]
struct HeapEntry {
    dist: f64,
    idx: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Larger (dist, idx) is "greater", so the heap root is the worst.
        self.dist
            .total_cmp(&other.dist)
            .then(self.idx.cmp(&other.idx))
    }
}
