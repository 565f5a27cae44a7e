use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::TopK;
use crate::scoring::{
    build_anchors_from_queries, classify, LabelQuery, QueryPrompt, RetrievalConfig, RetrievalMode,
};
use crate::store::EmbeddingStore;

use super::{EvalReport, InstancePrediction, MultipleChoiceDataset};

/// Inputs of a multiple-choice evaluation. `premises` has one row per
/// instance; `choices` has one row per candidate answer, instances in order
/// and each instance's choices in order. Choice rows are expected to embed
/// the answer-prefixed text (for example `the answer is: red blood cells`).
#[derive(Clone, Copy)]
pub struct MultipleChoiceTask<'a> {
    pub dataset: &'a MultipleChoiceDataset,
    pub premises: &'a EmbeddingStore,
    pub choices: &'a EmbeddingStore,
    pub index: &'a dyn TopK,
}

impl MultipleChoiceTask<'_> {
    pub fn check(&self) -> Result<()> {
        if self.premises.len() != self.dataset.len() {
            return Err(Error::Validation(format!(
                "premise store has {} rows for {} instances",
                self.premises.len(),
                self.dataset.len()
            )));
        }
        if self.choices.len() != self.dataset.total_choices() {
            return Err(Error::Validation(format!(
                "choice store has {} rows for {} choices",
                self.choices.len(),
                self.dataset.total_choices()
            )));
        }
        if self.dataset.is_empty() {
            return Err(Error::Validation("dataset is empty".into()));
        }
        let dim = self.index.store().dim();
        for (what, store) in [("premise", self.premises), ("choice", self.choices)] {
            if store.dim() != dim {
                return Err(Error::dim(dim, store.dim(), format!("{what} store vs corpus")));
            }
        }
        Ok(())
    }
}

/// Scores each premise against its own choices. Every choice is its own
/// retrieval query, so only `none` and `single_query` modes apply.
pub fn evaluate_multiple_choice(
    task: &MultipleChoiceTask<'_>,
    config: &RetrievalConfig,
    detail: bool,
) -> Result<EvalReport> {
    task.check()?;
    config.validate()?;
    if config.mode == RetrievalMode::MultiSynonym {
        return Err(Error::InvalidArgument(
            "multiple-choice evaluation does not use synonym queries".into(),
        ));
    }

    let mut offsets = Vec::with_capacity(task.dataset.len());
    let mut next = 0;
    for inst in task.dataset.instances() {
        offsets.push(next);
        next += inst.choices.len();
    }

    let preds: Vec<_> = task
        .dataset
        .instances()
        .par_iter()
        .zip(offsets.par_iter())
        .enumerate()
        .map(|(i, (inst, &offset))| {
            let queries: Vec<LabelQuery> = (0..inst.choices.len())
                .map(|j| {
                    let row = offset + j;
                    let prompt = QueryPrompt {
                        text: task.choices.text(row).to_string(),
                        embedding: task.choices.row(row).to_vec(),
                    };
                    let queries = match config.mode {
                        RetrievalMode::None => Vec::new(),
                        _ => vec![prompt.clone()],
                    };
                    LabelQuery { class_index: j, prompt, queries }
                })
                .collect();
            let anchors = build_anchors_from_queries(&queries, task.index, config)?;
            classify(task.premises.row(i), &anchors)
        })
        .collect::<Result<_>>()?;

    let correct = preds
        .iter()
        .zip(task.dataset.instances())
        .filter(|(p, inst)| p.predicted == inst.gold)
        .count();
    let rows = detail.then(|| {
        preds
            .iter()
            .zip(task.dataset.instances())
            .map(|(p, inst)| InstancePrediction {
                instance_id: inst.id.clone(),
                template_index: 0,
                totals: p.totals_by_class(),
                predicted: p.predicted,
                gold: inst.gold,
                tie: p.tie,
            })
            .collect()
    });
    Ok(EvalReport::new(
        *config,
        task.dataset.len(),
        vec!["(per-instance choices)".to_string()],
        vec![correct as f64 / preds.len() as f64],
        rows,
    ))
}
