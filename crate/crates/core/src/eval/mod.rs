//! Evaluation protocol: per-template accuracy, retrieval ablation, template
//! sensitivity and the few-shot baselines.

mod closed_set;
mod dataset;
mod export;
mod fewshot;
mod linear_probe;
mod multiple_choice;

use serde::{Deserialize, Serialize};

use crate::scoring::RetrievalConfig;

pub use closed_set::{ablation_run, evaluate_closed_set, sensitivity_report, AblationReport, ClosedSetTask};
pub use dataset::{ClosedSetDataset, ClosedSetInstance, MultipleChoiceDataset, MultipleChoiceInstance};
pub use export::{
    ablation_table, fewshot_table, report_table, sensitivity_table, write_predictions_csv,
};
pub use fewshot::{
    derive_seeds, linear_probe_baseline, prototypical_baseline, run_few_shot, sample_support,
    FewShotConfig, FewShotMethod, FewShotReport, LabeledEmbeddings, Prototypes,
    DEFAULT_FEW_SHOT_SEEDS, DEFAULT_SHOT_COUNTS,
};
pub use linear_probe::{LinearProbeParams, SoftmaxRegression};
pub use multiple_choice::{evaluate_multiple_choice, MultipleChoiceTask};

/// Mean, population standard deviation, minimum and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Returns `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            // a summed mean of equal values can be off by an ulp
            return Some(Self { mean: min, std: 0.0, min, max });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            min,
            max,
        })
    }
}

/// One scored instance under one template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub instance_id: String,
    pub template_index: usize,
    /// Total score per label, indexed by class (choice) index.
    pub totals: Vec<f64>,
    pub predicted: usize,
    pub gold: usize,
    pub tie: bool,
}

/// Accuracy per template plus its spread. `std` is the population standard
/// deviation (divide by the number of templates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub retrieval: RetrievalConfig,
    pub instances: usize,
    pub templates: Vec<String>,
    pub per_template_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<InstancePrediction>>,
}

impl EvalReport {
    pub(crate) fn new(
        retrieval: RetrievalConfig,
        instances: usize,
        templates: Vec<String>,
        per_template_accuracy: Vec<f64>,
        predictions: Option<Vec<InstancePrediction>>,
    ) -> Self {
        let s = Summary::of(&per_template_accuracy).expect("at least one template");
        Self {
            retrieval,
            instances,
            templates,
            per_template_accuracy,
            mean: s.mean,
            std: s.std,
            min: s.min,
            max: s.max,
            predictions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_uses_population_std() {
        let s = Summary::of(&[1.0, 0.0]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.std, 0.5);
        assert_eq!((s.min, s.max), (0.0, 1.0));
        assert_eq!(Summary::of(&[0.7; 4]).unwrap().std, 0.0);
        assert!(Summary::of(&[]).is_none());
    }
}
