use crate::error::Result;
use crate::store::EmbeddingStore;

use super::{check_query, check_searchable, dot, select_top_k, Hit, RetrievalResult, TopK};

/// Exhaustive scan over every row of a normalized store.
#[derive(Debug, Clone, Copy)]
pub struct FlatIndex<'a> {
    store: &'a EmbeddingStore,
}

impl<'a> FlatIndex<'a> {
    pub fn new(store: &'a EmbeddingStore) -> Result<Self> {
        check_searchable(store)?;
        Ok(Self { store })
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }
}

impl TopK for FlatIndex<'_> {
    fn store(&self) -> &EmbeddingStore {
        self.store
    }

    fn top_k(&self, query: &[f32], k: usize) -> Result<RetrievalResult> {
        check_query(self.store, query, k)?;
        let hits = self
            .store
            .rows()
            .enumerate()
            .map(|(row, v)| Hit {
                row,
                similarity: dot(query, v),
            })
            .collect();
        Ok(select_top_k(hits, k))
    }
}

pub fn build_flat_index(store: &EmbeddingStore) -> Result<FlatIndex<'_>> {
    FlatIndex::new(store)
}

pub fn flat_top_k(index: &FlatIndex<'_>, query: &[f32], k: usize) -> Result<RetrievalResult> {
    index.top_k(query, k)
}
