//! Few-shot baselines over frozen embeddings: class-mean prototypes and a
//! linear probe, each averaged over many random support draws.
//!
//! Seed `i` of a run is `base_seed + i` (wrapping), and each seed drives a
//! ChaCha8 generator that draws `shots` support rows per class, classes in
//! ascending order, without replacement.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::argmax_with_tie;
use crate::store::{l2_norm, EmbeddingStore, MIN_NORM};

use super::linear_probe::{LinearProbeParams, SoftmaxRegression};
use super::Summary;

pub const DEFAULT_SHOT_COUNTS: [usize; 5] = [2, 4, 8, 12, 16];
pub const DEFAULT_FEW_SHOT_SEEDS: usize = 50;

pub fn derive_seeds(base_seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base_seed.wrapping_add(i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FewShotMethod {
    Prototypical,
    LinearProbe,
}

impl fmt::Display for FewShotMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Prototypical => "prototypical",
            Self::LinearProbe => "linear_probe",
        })
    }
}

impl FromStr for FewShotMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "prototypical" | "proto" => Ok(Self::Prototypical),
            "linear_probe" | "linear" => Ok(Self::LinearProbe),
            _ => Err(Error::InvalidArgument(format!("unknown few-shot method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotConfig {
    pub method: FewShotMethod,
    pub shots: usize,
    pub seeds: Vec<u64>,
    pub probe: LinearProbeParams,
}

impl FewShotConfig {
    pub fn new(method: FewShotMethod, shots: usize, base_seed: u64, num_seeds: usize) -> Self {
        Self {
            method,
            shots,
            seeds: derive_seeds(base_seed, num_seeds),
            probe: LinearProbeParams::default(),
        }
    }
}

/// Embeddings with one class label per row.
#[derive(Debug, Clone, Copy)]
pub struct LabeledEmbeddings<'a> {
    pub store: &'a EmbeddingStore,
    pub labels: &'a [usize],
    pub num_classes: usize,
}

impl LabeledEmbeddings<'_> {
    fn check(&self, what: &str) -> Result<()> {
        if self.labels.len() != self.store.len() {
            return Err(Error::Validation(format!(
                "{what} store has {} rows but {} labels",
                self.store.len(),
                self.labels.len()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::Validation(format!(
                "{what} label {bad} outside {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }
}

/// Draws `shots` rows per class (classes ascending) for one seed.
pub fn sample_support(labels: &[usize], num_classes: usize, shots: usize, seed: u64) -> Result<Vec<usize>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots per class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(shots * num_classes);
    for class in 0..num_classes {
        let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if pool.is_empty() {
            return Err(Error::Validation(format!("class {class} has no support examples")));
        }
        if pool.len() < shots {
            return Err(Error::Validation(format!(
                "class {class} has {} support examples, {shots} requested",
                pool.len()
            )));
        }
        picked.extend(
            rand::seq::index::sample(&mut rng, pool.len(), shots)
                .into_iter()
                .map(|i| pool[i]),
        );
    }
    Ok(picked)
}

/// Unit-length class means.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    dim: usize,
    centers: Vec<Vec<f64>>,
}

impl Prototypes {
    pub fn fit(store: &EmbeddingStore, rows: &[usize], labels: &[usize], num_classes: usize) -> Result<Self> {
        let dim = store.dim();
        let mut sums = vec![vec![0f64; dim]; num_classes];
        let mut counts = vec![0usize; num_classes];
        for &row in rows {
            let c = labels[row];
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(store.row(row)) {
                *s += f64::from(x);
            }
        }
        for (class, (sum, &count)) in sums.iter_mut().zip(&counts).enumerate() {
            if count == 0 {
                return Err(Error::Validation(format!("class {class} has no support examples")));
            }
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
            let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < MIN_NORM {
                return Err(Error::Numeric(format!("class {class} support mean is the zero vector")));
            }
            for s in sum.iter_mut() {
                *s /= norm;
            }
        }
        Ok(Self { dim, centers: sums })
    }

    pub fn prototype(&self, class: usize) -> &[f64] {
        &self.centers[class]
    }

    /// Most similar prototype (cosine), lowest class on ties.
    pub fn predict(&self, query: &[f32]) -> (usize, bool) {
        debug_assert_eq!(query.len(), self.dim);
        let qn = l2_norm(query).max(MIN_NORM);
        let scores: Vec<(usize, f64)> = self
            .centers
            .iter()
            .enumerate()
            .map(|(c, p)| {
                let d: f64 = p.iter().zip(query).map(|(a, &b)| a * f64::from(b)).sum();
                (c, d / qn)
            })
            .collect();
        argmax_with_tie(&scores).expect("at least one class")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotReport {
    pub method: FewShotMethod,
    pub shots: usize,
    pub seeds: Vec<u64>,
    pub per_seed_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

fn to_f64_rows(store: &EmbeddingStore, rows: &[usize]) -> Vec<f64> {
    rows.iter()
        .flat_map(|&r| store.row(r).iter().map(|&x| f64::from(x)))
        .collect()
}

fn accuracy_for_seed(
    support: &LabeledEmbeddings<'_>,
    query: &LabeledEmbeddings<'_>,
    config: &FewShotConfig,
    seed: u64,
) -> Result<f64> {
    let rows = sample_support(support.labels, support.num_classes, config.shots, seed)?;
    let correct = match config.method {
        FewShotMethod::Prototypical => {
            let protos = Prototypes::fit(support.store, &rows, support.labels, support.num_classes)?;
            (0..query.store.len())
                .filter(|&i| protos.predict(query.store.row(i)).0 == query.labels[i])
                .count()
        }
        FewShotMethod::LinearProbe => {
            let xs = to_f64_rows(support.store, &rows);
            let ys: Vec<usize> = rows.iter().map(|&r| support.labels[r]).collect();
            let model = SoftmaxRegression::fit(&xs, &ys, support.num_classes, support.store.dim(), &config.probe)?;
            (0..query.store.len())
                .filter(|&i| {
                    let x: Vec<f64> = query.store.row(i).iter().map(|&v| f64::from(v)).collect();
                    model.predict(&x) == query.labels[i]
                })
                .count()
        }
    };
    Ok(correct as f64 / query.store.len() as f64)
}

pub fn run_few_shot(
    support: &LabeledEmbeddings<'_>,
    query: &LabeledEmbeddings<'_>,
    config: &FewShotConfig,
) -> Result<FewShotReport> {
    support.check("support")?;
    query.check("query")?;
    if support.store.dim() != query.store.dim() {
        return Err(Error::dim(support.store.dim(), query.store.dim(), "query vs support"));
    }
    if query.store.is_empty() {
        return Err(Error::Validation("query set is empty".into()));
    }
    if config.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let per_seed: Vec<f64> = config
        .seeds
        .par_iter()
        .map(|&seed| accuracy_for_seed(support, query, config, seed))
        .collect::<Result<_>>()?;
    let s = Summary::of(&per_seed).expect("non-empty seeds");
    Ok(FewShotReport {
        method: config.method,
        shots: config.shots,
        seeds: config.seeds.clone(),
        per_seed_accuracy: per_seed,
        mean: s.mean,
        std: s.std,
        min: s.min,
        max: s.max,
    })
}

pub fn prototypical_baseline(
    support: &LabeledEmbeddings<'_>,
    query: &LabeledEmbeddings<'_>,
    config: &FewShotConfig,
) -> Result<FewShotReport> {
    let config = FewShotConfig { method: FewShotMethod::Prototypical, ..config.clone() };
    run_few_shot(support, query, &config)
}

pub fn linear_probe_baseline(
    support: &LabeledEmbeddings<'_>,
    query: &LabeledEmbeddings<'_>,
    config: &FewShotConfig,
) -> Result<FewShotReport> {
    let config = FewShotConfig { method: FewShotMethod::LinearProbe, ..config.clone() };
    run_few_shot(support, query, &config)
}
