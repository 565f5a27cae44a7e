use crate::error::{Error, Result};
use crate::store::EmbeddingStore;

use super::kmeans::{SphericalKMeans, DEFAULT_KMEANS_SEED};
use super::{check_query, check_searchable, dot, rank_order, select_top_k, Hit, RetrievalResult, TopK};

/// Inverted-file index: rows grouped by their nearest spherical k-means
/// centroid. A query scans the `probes` partitions with the most similar
/// centroids and runs an exact top-k over their union.
#[derive(Debug, Clone)]
pub struct PartitionedIndex<'a> {
    store: &'a EmbeddingStore,
    centroids: Vec<f32>,
    assignments: Vec<u32>,
    lists: Vec<Vec<usize>>,
    probes: usize,
}

impl<'a> PartitionedIndex<'a> {
    pub fn build(store: &'a EmbeddingStore, partitions: usize, probes: usize, seed: u64) -> Result<Self> {
        check_searchable(store)?;
        check_probes(partitions, probes)?;
        let clustering = SphericalKMeans::new(partitions).with_seed(seed).fit(store)?;
        Self::from_parts(store, clustering.centroids, clustering.assignments, probes)
    }

    /// Reassembles an index from trained parts (used when loading from disk).
    pub fn from_parts(
        store: &'a EmbeddingStore,
        centroids: Vec<f32>,
        assignments: Vec<u32>,
        probes: usize,
    ) -> Result<Self> {
        check_searchable(store)?;
        let dim = store.dim();
        if centroids.is_empty() || !centroids.len().is_multiple_of(dim) {
            return Err(Error::Validation(format!(
                "{} centroid components do not form rows of dim {dim}",
                centroids.len()
            )));
        }
        let partitions = centroids.len() / dim;
        check_probes(partitions, probes)?;
        if assignments.len() != store.len() {
            return Err(Error::Validation(format!(
                "{} assignments for {} rows",
                assignments.len(),
                store.len()
            )));
        }
        let mut lists = vec![Vec::new(); partitions];
        for (row, &p) in assignments.iter().enumerate() {
            let list = lists.get_mut(p as usize).ok_or_else(|| {
                Error::Validation(format!("row {row} assigned to partition {p} of {partitions}"))
            })?;
            list.push(row);
        }
        Ok(Self {
            store,
            centroids,
            assignments,
            lists,
            probes,
        })
    }

    pub fn partitions(&self) -> usize {
        self.lists.len()
    }

    pub fn probes(&self) -> usize {
        self.probes
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn centroid(&self, p: usize) -> &[f32] {
        let dim = self.store.dim();
        &self.centroids[p * dim..(p + 1) * dim]
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn partition_rows(&self, p: usize) -> &[usize] {
        &self.lists[p]
    }

    /// Exact top-k restricted to the `probes` closest partitions.
    pub fn search(&self, query: &[f32], k: usize, probes: usize) -> Result<RetrievalResult> {
        check_query(self.store, query, k)?;
        check_probes(self.partitions(), probes)?;
        let mut ranked: Vec<Hit> = self
            .centroids
            .chunks_exact(self.store.dim())
            .enumerate()
            .map(|(row, c)| Hit {
                row,
                similarity: dot(query, c),
            })
            .collect();
        ranked.sort_unstable_by(rank_order);

        let mut candidates = Vec::new();
        for probe in &ranked[..probes] {
            for &row in &self.lists[probe.row] {
                candidates.push(Hit {
                    row,
                    similarity: dot(query, self.store.row(row)),
                });
            }
        }
        Ok(select_top_k(candidates, k))
    }
}

impl TopK for PartitionedIndex<'_> {
    fn store(&self) -> &EmbeddingStore {
        self.store
    }

    fn top_k(&self, query: &[f32], k: usize) -> Result<RetrievalResult> {
        self.search(query, k, self.probes)
    }
}

fn check_probes(partitions: usize, probes: usize) -> Result<()> {
    if partitions == 0 {
        return Err(Error::InvalidArgument("partition count must be at least 1".into()));
    }
    if probes == 0 || probes > partitions {
        return Err(Error::InvalidArgument(format!(
            "probes must be in [1, {partitions}], got {probes}"
        )));
    }
    Ok(())
}

pub fn build_partitioned_index(
    store: &EmbeddingStore,
    partitions: usize,
    probes: usize,
) -> Result<PartitionedIndex<'_>> {
    PartitionedIndex::build(store, partitions, probes, DEFAULT_KMEANS_SEED)
}

pub fn build_partitioned_index_with_seed(
    store: &EmbeddingStore,
    partitions: usize,
    probes: usize,
    seed: u64,
) -> Result<PartitionedIndex<'_>> {
    PartitionedIndex::build(store, partitions, probes, seed)
}

pub fn approx_top_k(
    index: &PartitionedIndex<'_>,
    query: &[f32],
    k: usize,
    probes: usize,
) -> Result<RetrievalResult> {
    index.search(query, k, probes)
}
