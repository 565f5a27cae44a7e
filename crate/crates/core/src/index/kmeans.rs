//! Spherical k-means (Lloyd iterations on the unit sphere).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::{EmbeddingStore, MIN_NORM};

use super::dot;

pub const MAX_LLOYD_ITERATIONS: usize = 20;
pub const DEFAULT_KMEANS_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphericalKMeans {
    pub partitions: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

/// Trained centroids (row-major, unit norm) and per-row partition ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<f32>,
    pub assignments: Vec<u32>,
    pub iterations: usize,
}

impl SphericalKMeans {
    pub fn new(partitions: usize) -> Self {
        Self {
            partitions,
            max_iterations: MAX_LLOYD_ITERATIONS,
            seed: DEFAULT_KMEANS_SEED,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn fit(&self, store: &EmbeddingStore) -> Result<Clustering> {
        let p = self.partitions;
        let n = store.len();
        let dim = store.dim();
        if p == 0 {
            return Err(Error::InvalidArgument("partition count must be at least 1".into()));
        }
        if p > n {
            return Err(Error::InvalidArgument(format!(
                "{p} partitions requested for {n} rows"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut seeds = rand::seq::index::sample(&mut rng, n, p).into_vec();
        seeds.sort_unstable();
        let mut centroids: Vec<f32> = Vec::with_capacity(p * dim);
        for &row in &seeds {
            centroids.extend_from_slice(store.row(row));
        }

        let mut assigned = assign(store, &centroids);
        let mut iterations = 0;
        while iterations < self.max_iterations {
            iterations += 1;
            let mut labels: Vec<u32> = assigned.iter().map(|a| a.0).collect();
            reseed_empty(&assigned, &mut labels, p);
            centroids = recompute_centroids(store, &labels, &centroids, p);
            let next = assign(store, &centroids);
            let changed = next.iter().zip(&assigned).any(|(a, b)| a.0 != b.0);
            assigned = next;
            if !changed {
                break;
            }
        }

        Ok(Clustering {
            centroids,
            assignments: assigned.into_iter().map(|a| a.0).collect(),
            iterations,
        })
    }
}

/// Most similar centroid per row (lowest index on ties) and that similarity.
pub(crate) fn assign(store: &EmbeddingStore, centroids: &[f32]) -> Vec<(u32, f64)> {
    let dim = store.dim();
    store
        .as_slice()
        .par_chunks_exact(dim)
        .map(|v| nearest_centroid(v, centroids, dim))
        .collect()
}

fn nearest_centroid(v: &[f32], centroids: &[f32], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::NEG_INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let s = dot(v, centroid);
        if s > best.1 {
            best = (c as u32, s);
        }
    }
    best
}

/// Moves the row farthest from its own centroid into each empty partition.
fn reseed_empty(assigned: &[(u32, f64)], labels: &mut [u32], p: usize) {
    let mut counts = vec![0usize; p];
    for &l in labels.iter() {
        counts[l as usize] += 1;
    }
    if counts.iter().all(|&c| c > 0) {
        return;
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| {
        assigned[a]
            .1
            .partial_cmp(&assigned[b].1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut donors = order.into_iter();
    for empty in 0..p {
        if counts[empty] > 0 {
            continue;
        }
        for row in donors.by_ref() {
            let from = labels[row] as usize;
            if counts[from] > 1 {
                counts[from] -= 1;
                counts[empty] = 1;
                labels[row] = empty as u32;
                break;
            }
        }
    }
}

fn recompute_centroids(store: &EmbeddingStore, labels: &[u32], previous: &[f32], p: usize) -> Vec<f32> {
    let dim = store.dim();
    let mut sums = vec![0f64; p * dim];
    for (v, &l) in store.rows().zip(labels) {
        let acc = &mut sums[l as usize * dim..(l as usize + 1) * dim];
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += f64::from(x);
        }
    }
    let mut out = Vec::with_capacity(p * dim);
    for (c, sum) in sums.chunks_exact(dim).enumerate() {
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < MIN_NORM {
            // members cancel out; keep the old direction
            out.extend_from_slice(&previous[c * dim..(c + 1) * dim]);
        } else {
            out.extend(sum.iter().map(|&x| (x / norm) as f32));
        }
    }
    out
}
