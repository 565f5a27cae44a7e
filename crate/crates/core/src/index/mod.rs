//! Top-k cosine search over a normalized [`EmbeddingStore`].
//!
//! Two structures answer the same query contract:
//!
//! * [`FlatIndex`] scans every row (exact).
//! * [`PartitionedIndex`] clusters rows with spherical k-means and scans only
//!   the partitions whose centroids are closest to the query.
//!
//! Results are ordered by descending similarity, ties by ascending row id.

mod flat;
mod kmeans;
mod partitioned;
mod persist;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{l2_norm, EmbeddingStore};

pub use flat::{build_flat_index, flat_top_k, FlatIndex};
pub use kmeans::{SphericalKMeans, DEFAULT_KMEANS_SEED, MAX_LLOYD_ITERATIONS};
pub use partitioned::{
    approx_top_k, build_partitioned_index, build_partitioned_index_with_seed, PartitionedIndex,
};
pub use persist::{load_index, save_index, INDEX_MAGIC, INDEX_VERSION};

/// Queries whose norm falls outside `1 ± QUERY_NORM_TOLERANCE` are rejected.
pub const QUERY_NORM_TOLERANCE: f64 = 1e-3;

/// Inner product accumulated in double precision, left to right.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub row: usize,
    pub similarity: f64,
}

/// Ranked hits for one query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<Hit>,
}

impl RetrievalResult {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.hits.iter().map(|h| h.row)
    }
}

/// Descending similarity, then ascending row.
#[inline]
pub(crate) fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    b.similarity
        .partial_cmp(&a.similarity)
        .unwrap_or(Ordering::Equal)
        .then(a.row.cmp(&b.row))
}

pub(crate) fn select_top_k(mut candidates: Vec<Hit>, k: usize) -> RetrievalResult {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, rank_order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(rank_order);
    RetrievalResult { hits: candidates }
}

pub(crate) fn check_query(store: &EmbeddingStore, query: &[f32], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if query.len() != store.dim() {
        return Err(Error::dim(store.dim(), query.len(), "query"));
    }
    let norm = l2_norm(query);
    if norm.is_nan() || (norm - 1.0).abs() > QUERY_NORM_TOLERANCE {
        return Err(Error::Validation(format!("query is not unit length (norm {norm:.6})")));
    }
    Ok(())
}

pub(crate) fn check_searchable(store: &EmbeddingStore) -> Result<()> {
    if !store.is_normalized() {
        return Err(Error::Validation("index requires a normalized store".into()));
    }
    if store.is_empty() {
        return Err(Error::InvalidArgument("cannot index an empty store".into()));
    }
    Ok(())
}

/// Anything that answers top-k queries over a corpus store.
pub trait TopK: Sync {
    fn store(&self) -> &EmbeddingStore;

    fn top_k(&self, query: &[f32], k: usize) -> Result<RetrievalResult>;

    /// Answers many queries; the output is independent of thread count.
    fn top_k_batch(&self, queries: &[&[f32]], k: usize) -> Result<Vec<RetrievalResult>> {
        queries.par_iter().map(|q| self.top_k(q, k)).collect()
    }
}

/// Either kind of index, as loaded from disk.
#[derive(Debug, Clone)]
pub enum CorpusIndex<'a> {
    Flat(FlatIndex<'a>),
    Partitioned(PartitionedIndex<'a>),
}

impl CorpusIndex<'_> {
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusIndex::Flat(_) => "flat",
            CorpusIndex::Partitioned(_) => "partitioned",
        }
    }
}

impl TopK for CorpusIndex<'_> {
    fn store(&self) -> &EmbeddingStore {
        match self {
            CorpusIndex::Flat(i) => i.store(),
            CorpusIndex::Partitioned(i) => i.store(),
        }
    }

    fn top_k(&self, query: &[f32], k: usize) -> Result<RetrievalResult> {
        match self {
            CorpusIndex::Flat(i) => i.top_k(query, k),
            CorpusIndex::Partitioned(i) => i.top_k(query, k),
        }
    }
}
