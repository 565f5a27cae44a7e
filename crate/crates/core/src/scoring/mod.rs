//! Label scoring.
//!
//! For an input embedding `h` and label `m` with prompt embedding `z_m` and
//! retrieved anchors `r_1..r_K`:
//!
//! ```text
//! direct(m)    = cos(h, z_m)
//! retrieval(m) = (1/K) * sum_k cos(h, r_k)      (0 when K = 0)
//! total(m)     = direct(m) + retrieval(m)
//! ```
//!
//! The prediction is the label with the largest total; among equal maxima
//! the lowest class index wins and the tie is reported.

mod anchors;
mod verbalizer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{l2_norm, MIN_NORM};

pub use anchors::{
    build_anchors_from_queries, build_label_anchors, plan_queries, resolve_plan, LabelAnchorSet,
    LabelAnchors, LabelQuery, PlannedLabel, QueryPrompt, RetrievalConfig, RetrievalMode,
    RetrievedAnchor, DEFAULT_RETRIEVAL_SIZE, DEFAULT_SYNONYM_QUERIES,
};
pub use verbalizer::{
    expand_synonym_prompts, render, render_prompts, LabelSpec, TaskKind, VerbalizerSpec,
    PLACEHOLDER,
};

/// Totals within this distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(a.len(), b.len(), "cosine similarity"));
    }
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na < MIN_NORM || nb < MIN_NORM {
        return Err(Error::Validation("cosine similarity of a zero vector".into()));
    }
    Ok(cosine_unchecked(a, b, na * nb))
}

#[inline]
fn cosine_unchecked(a: &[f32], b: &[f32], norms: f64) -> f64 {
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    (d / norms).clamp(-1.0, 1.0)
}

fn check_input(input: &[f32], anchors: &LabelAnchorSet) -> Result<f64> {
    if input.len() != anchors.dim {
        return Err(Error::dim(anchors.dim, input.len(), "input"));
    }
    let n = l2_norm(input);
    if n < MIN_NORM {
        return Err(Error::Validation("input is a zero vector".into()));
    }
    Ok(n)
}

fn cosine_to(input: &[f32], input_norm: f64, other: &[f32]) -> Result<f64> {
    let n = l2_norm(other);
    if n < MIN_NORM {
        return Err(Error::Validation("anchor is a zero vector".into()));
    }
    Ok(cosine_unchecked(input, other, input_norm * n))
}

/// Prompt similarity for every label, in anchor order.
pub fn score_direct(input: &[f32], anchors: &LabelAnchorSet) -> Result<Vec<f64>> {
    let norm = check_input(input, anchors)?;
    anchors
        .labels
        .iter()
        .map(|l| cosine_to(input, norm, &l.prompt_embedding))
        .collect()
}

/// Mean similarity to each label's retrieved anchors, in anchor order.
pub fn score_retrieval(input: &[f32], anchors: &LabelAnchorSet) -> Result<Vec<f64>> {
    let norm = check_input(input, anchors)?;
    anchors
        .labels
        .iter()
        .map(|l| {
            if l.retrieved.is_empty() {
                return Ok(0.0);
            }
            let mut sum = 0.0;
            for r in &l.retrieved {
                sum += cosine_to(input, norm, &r.embedding)?;
            }
            Ok(sum / l.retrieved.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub class_index: usize,
    pub direct: f64,
    pub retrieval: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub scores: Vec<LabelScore>,
    pub predicted: usize,
    pub tie: bool,
}

impl ScoredPrediction {
    /// Totals indexed by class index.
    pub fn totals_by_class(&self) -> Vec<f64> {
        let mut out = vec![f64::NAN; self.scores.len()];
        for s in &self.scores {
            if s.class_index < out.len() {
                out[s.class_index] = s.total;
            }
        }
        out
    }
}

/// Lowest class index among the maximizers, and whether any other label
/// comes within [`TIE_TOLERANCE`] of the maximum.
pub fn argmax_with_tie(scores: &[(usize, f64)]) -> Option<(usize, bool)> {
    let max = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let mut near = scores.iter().filter(|s| s.1 >= max - TIE_TOLERANCE);
    let first = near.next()?;
    let mut predicted = first.0;
    let mut count = 1;
    for s in near {
        count += 1;
        predicted = predicted.min(s.0);
    }
    Some((predicted, count > 1))
}

pub fn classify(input: &[f32], anchors: &LabelAnchorSet) -> Result<ScoredPrediction> {
    if anchors.labels.is_empty() {
        return Err(Error::Validation("cannot classify against an empty label set".into()));
    }
    let direct = score_direct(input, anchors)?;
    let retrieval = score_retrieval(input, anchors)?;
    let scores: Vec<LabelScore> = anchors
        .labels
        .iter()
        .zip(direct.iter().zip(&retrieval))
        .map(|(l, (&d, &r))| LabelScore {
            class_index: l.class_index,
            direct: d,
            retrieval: r,
            total: d + r,
        })
        .collect();
    let pairs: Vec<(usize, f64)> = scores.iter().map(|s| (s.class_index, s.total)).collect();
    let (predicted, tie) = argmax_with_tie(&pairs).expect("non-empty label set");
    Ok(ScoredPrediction { scores, predicted, tie })
}
