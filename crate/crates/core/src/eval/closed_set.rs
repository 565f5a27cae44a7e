use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::TopK;
use crate::scoring::{
    build_label_anchors, classify, plan_queries, RetrievalConfig, RetrievalMode, ScoredPrediction,
    TaskKind, VerbalizerSpec,
};
use crate::store::EmbeddingStore;

use super::{ClosedSetDataset, EvalReport, InstancePrediction};

/// Everything a closed-set evaluation reads. Row `i` of `inputs` is the
/// embedding of dataset instance `i`.
#[derive(Clone, Copy)]
pub struct ClosedSetTask<'a> {
    pub dataset: &'a ClosedSetDataset,
    pub inputs: &'a EmbeddingStore,
    pub verbalizer: &'a VerbalizerSpec,
    pub prompts: &'a EmbeddingStore,
    pub index: &'a dyn TopK,
}

impl ClosedSetTask<'_> {
    pub fn check(&self) -> Result<()> {
        if self.verbalizer.task_kind != TaskKind::ClosedSet {
            return Err(Error::Validation("verbalizer is not a closed-set verbalizer".into()));
        }
        self.verbalizer.validate()?;
        if self.inputs.len() != self.dataset.len() {
            return Err(Error::Validation(format!(
                "input store has {} rows but the dataset has {} instances",
                self.inputs.len(),
                self.dataset.len()
            )));
        }
        if self.dataset.is_empty() {
            return Err(Error::Validation("dataset is empty".into()));
        }
        if self.dataset.num_classes() != self.verbalizer.num_classes() {
            return Err(Error::Validation(format!(
                "dataset has {} classes, verbalizer has {}",
                self.dataset.num_classes(),
                self.verbalizer.num_classes()
            )));
        }
        let dim = self.index.store().dim();
        for (what, store) in [("input", self.inputs), ("prompt", self.prompts)] {
            if store.dim() != dim {
                return Err(Error::dim(dim, store.dim(), format!("{what} store vs corpus")));
            }
        }
        Ok(())
    }

    fn classify_template(
        &self,
        template_index: usize,
        config: &RetrievalConfig,
    ) -> Result<Vec<ScoredPrediction>> {
        let plan = plan_queries(self.verbalizer, template_index, config)?;
        let anchors = build_label_anchors(self.prompts, self.index, &plan, config)?;
        (0..self.inputs.len())
            .into_par_iter()
            .map(|i| classify(self.inputs.row(i), &anchors))
            .collect()
    }
}

/// Classifies every instance under every template and reports accuracy per
/// template. With `detail` the per-instance totals are kept.
pub fn evaluate_closed_set(
    task: &ClosedSetTask<'_>,
    config: &RetrievalConfig,
    detail: bool,
) -> Result<EvalReport> {
    task.check()?;
    config.validate()?;
    let templates = &task.verbalizer.templates;
    let mut accuracies = Vec::with_capacity(templates.len());
    let mut rows = detail.then(Vec::new);
    for t in 0..templates.len() {
        let preds = task.classify_template(t, config)?;
        let correct = preds
            .iter()
            .zip(task.dataset.instances())
            .filter(|(p, inst)| p.predicted == inst.gold)
            .count();
        accuracies.push(correct as f64 / preds.len() as f64);
        if let Some(rows) = rows.as_mut() {
            rows.extend(preds.iter().zip(task.dataset.instances()).map(|(p, inst)| {
                InstancePrediction {
                    instance_id: inst.id.clone(),
                    template_index: t,
                    totals: p.totals_by_class(),
                    predicted: p.predicted,
                    gold: inst.gold,
                    tie: p.tie,
                }
            }));
        }
    }
    Ok(EvalReport::new(
        *config,
        task.dataset.len(),
        templates.clone(),
        accuracies,
        rows,
    ))
}

/// The same evaluation under each retrieval mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub none: EvalReport,
    pub single_query: EvalReport,
    pub multi_synonym: EvalReport,
}

impl AblationReport {
    pub fn get(&self, mode: RetrievalMode) -> &EvalReport {
        match mode {
            RetrievalMode::None => &self.none,
            RetrievalMode::SingleQuery => &self.single_query,
            RetrievalMode::MultiSynonym => &self.multi_synonym,
        }
    }
}

/// Runs [`evaluate_closed_set`] three times, changing only the mode. K and N
/// come from `config`; single-query retrieval uses N = 1.
pub fn ablation_run(task: &ClosedSetTask<'_>, config: &RetrievalConfig) -> Result<AblationReport> {
    let run = |mode| evaluate_closed_set(task, &config.with_mode(mode), false);
    Ok(AblationReport {
        none: run(RetrievalMode::None)?,
        single_query: run(RetrievalMode::SingleQuery)?,
        multi_synonym: run(RetrievalMode::MultiSynonym)?,
    })
}

/// Accuracy spread over paraphrased templates.
pub fn sensitivity_report(task: &ClosedSetTask<'_>, config: &RetrievalConfig) -> Result<EvalReport> {
    if task.verbalizer.templates.len() < 2 {
        return Err(Error::Validation(format!(
            "sensitivity needs at least 2 templates, verbalizer has {}",
            task.verbalizer.templates.len()
        )));
    }
    evaluate_closed_set(task, config, false)
}
