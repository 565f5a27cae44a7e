//! Class anchors: each label's prompt embedding plus the corpus sentences
//! retrieved for it.
//!
//! Retrieval depends only on the prompts, so anchors are built once per
//! template and shared by every input scored against it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::TopK;
use crate::store::EmbeddingStore;

use super::verbalizer::{expand_synonym_prompts, render_prompts, VerbalizerSpec};

/// Total retrieved anchors per label.
pub const DEFAULT_RETRIEVAL_SIZE: usize = 25;
/// Synonymous queries per label in closed-set classification.
pub const DEFAULT_SYNONYM_QUERIES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    /// Prompt similarity only.
    None,
    /// Top-K for the label's own prompt.
    SingleQuery,
    /// Top-K/N for each of N synonymous prompts.
    MultiSynonym,
}

impl RetrievalMode {
    pub const ALL: [RetrievalMode; 3] = [Self::None, Self::SingleQuery, Self::MultiSynonym];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::SingleQuery => "single_query",
            Self::MultiSynonym => "multi_synonym",
        }
    }
}

impl fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrievalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "none" => Ok(Self::None),
            "single_query" | "single" => Ok(Self::SingleQuery),
            "multi_synonym" | "multi" => Ok(Self::MultiSynonym),
            _ => Err(Error::InvalidArgument(format!(
                "unknown retrieval mode '{s}' (expected none, single_query or multi_synonym)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub mode: RetrievalMode,
    /// Retrieved anchors per label (K).
    pub k: usize,
    /// Number of retrieval queries per label (N).
    pub n: usize,
}

impl RetrievalConfig {
    pub fn none() -> Self {
        Self { mode: RetrievalMode::None, k: 0, n: 0 }
    }

    pub fn single_query(k: usize) -> Self {
        Self { mode: RetrievalMode::SingleQuery, k, n: 1 }
    }

    pub fn multi_synonym(k: usize, n: usize) -> Self {
        Self { mode: RetrievalMode::MultiSynonym, k, n }
    }

    /// Same K and N, different mode; single-query forces N = 1.
    pub fn with_mode(self, mode: RetrievalMode) -> Self {
        match mode {
            RetrievalMode::None => Self { mode, ..self },
            RetrievalMode::SingleQuery => Self::single_query(self.k),
            RetrievalMode::MultiSynonym => Self::multi_synonym(self.k, self.n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            RetrievalMode::None => Ok(()),
            RetrievalMode::SingleQuery => {
                if self.k == 0 {
                    return Err(Error::InvalidArgument("retrieval size K must be at least 1".into()));
                }
                if self.n != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "single-query retrieval uses N = 1, got {}",
                        self.n
                    )));
                }
                Ok(())
            }
            RetrievalMode::MultiSynonym => {
                if self.k == 0 || self.n == 0 {
                    return Err(Error::InvalidArgument("K and N must be at least 1".into()));
                }
                if !self.k.is_multiple_of(self.n) {
                    return Err(Error::InvalidArgument(format!(
                        "K = {} is not divisible by N = {}",
                        self.k, self.n
                    )));
                }
                Ok(())
            }
        }
    }

    /// Hits requested per query.
    pub fn per_query(&self) -> usize {
        match self.mode {
            RetrievalMode::None => 0,
            RetrievalMode::SingleQuery => self.k,
            RetrievalMode::MultiSynonym => self.k / self.n,
        }
    }
}

/// Text-level retrieval plan for one label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedLabel {
    pub class_index: usize,
    pub prompt: String,
    pub queries: Vec<String>,
}

/// Renders one template into prompts and retrieval queries for every label.
pub fn plan_queries(
    spec: &VerbalizerSpec,
    template_index: usize,
    config: &RetrievalConfig,
) -> Result<Vec<PlannedLabel>> {
    config.validate()?;
    render_prompts(spec, template_index)?
        .into_iter()
        .map(|(class_index, prompt)| {
            let queries = match config.mode {
                RetrievalMode::None => Vec::new(),
                RetrievalMode::SingleQuery => vec![prompt.clone()],
                RetrievalMode::MultiSynonym => {
                    expand_synonym_prompts(spec, template_index, class_index, config.n)?
                }
            };
            Ok(PlannedLabel { class_index, prompt, queries })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryPrompt {
    pub text: String,
    pub embedding: Vec<f32>,
}

/// Embedding-level retrieval plan for one label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelQuery {
    pub class_index: usize,
    pub prompt: QueryPrompt,
    pub queries: Vec<QueryPrompt>,
}

/// Looks up every prompt and query text of a plan in a prompt store.
pub fn resolve_plan(plan: &[PlannedLabel], prompts: &EmbeddingStore) -> Result<Vec<LabelQuery>> {
    let lookup = |text: &str| -> Result<QueryPrompt> {
        let row = prompts.position_of_text(text).ok_or_else(|| {
            Error::Validation(format!("no prompt embedding for {text:?}"))
        })?;
        Ok(QueryPrompt {
            text: text.to_string(),
            embedding: prompts.row(row).to_vec(),
        })
    };
    plan.iter()
        .map(|p| {
            Ok(LabelQuery {
                class_index: p.class_index,
                prompt: lookup(&p.prompt)?,
                queries: p.queries.iter().map(|q| lookup(q)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedAnchor {
    pub row: usize,
    /// Similarity between the source query and this corpus row.
    pub query_similarity: f64,
    pub source_query: String,
    pub embedding: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAnchors {
    pub class_index: usize,
    pub prompt: String,
    pub prompt_embedding: Vec<f32>,
    pub retrieved: Vec<RetrievedAnchor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAnchorSet {
    pub dim: usize,
    pub config: RetrievalConfig,
    pub labels: Vec<LabelAnchors>,
}

impl LabelAnchorSet {
    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }
}

/// Retrieves anchors for already-embedded queries.
///
/// Hits of each query are appended in query order; a corpus row found by two
/// synonymous queries appears twice.
pub fn build_anchors_from_queries(
    queries: &[LabelQuery],
    index: &dyn TopK,
    config: &RetrievalConfig,
) -> Result<LabelAnchorSet> {
    config.validate()?;
    let corpus = index.store();
    let dim = corpus.dim();
    let mut seen = std::collections::HashSet::new();
    for q in queries {
        if !seen.insert(q.class_index) {
            return Err(Error::Validation(format!("class index {} listed twice", q.class_index)));
        }
        for p in std::iter::once(&q.prompt).chain(&q.queries) {
            if p.embedding.len() != dim {
                return Err(Error::dim(dim, p.embedding.len(), format!("prompt {:?}", p.text)));
            }
        }
        let expected = match config.mode {
            RetrievalMode::None => 0,
            RetrievalMode::SingleQuery => 1,
            RetrievalMode::MultiSynonym => config.n,
        };
        if q.queries.len() != expected {
            return Err(Error::Validation(format!(
                "label {} has {} retrieval queries, mode {} needs {expected}",
                q.class_index,
                q.queries.len(),
                config.mode
            )));
        }
    }

    let flat: Vec<&QueryPrompt> = queries.iter().flat_map(|q| &q.queries).collect();
    let vectors: Vec<&[f32]> = flat.iter().map(|q| q.embedding.as_slice()).collect();
    let results = if vectors.is_empty() {
        Vec::new()
    } else {
        index.top_k_batch(&vectors, config.per_query())?
    };

    let mut results = results.into_iter();
    let labels = queries
        .iter()
        .map(|q| {
            let mut retrieved = Vec::with_capacity(config.k);
            for query in &q.queries {
                let res = results.next().expect("one result per query");
                retrieved.extend(res.hits.into_iter().map(|h| RetrievedAnchor {
                    row: h.row,
                    query_similarity: h.similarity,
                    source_query: query.text.clone(),
                    embedding: corpus.row(h.row).to_vec(),
                }));
            }
            LabelAnchors {
                class_index: q.class_index,
                prompt: q.prompt.text.clone(),
                prompt_embedding: q.prompt.embedding.clone(),
                retrieved,
            }
        })
        .collect();

    Ok(LabelAnchorSet {
        dim,
        config: *config,
        labels,
    })
}

/// Resolves a text plan against the prompt store and retrieves anchors.
pub fn build_label_anchors(
    prompts: &EmbeddingStore,
    index: &dyn TopK,
    plan: &[PlannedLabel],
    config: &RetrievalConfig,
) -> Result<LabelAnchorSet> {
    if prompts.dim() != index.store().dim() {
        return Err(Error::dim(index.store().dim(), prompts.dim(), "prompt store vs corpus"));
    }
    let queries = resolve_plan(plan, prompts)?;
    build_anchors_from_queries(&queries, index, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::FlatIndex;
    use crate::scoring::verbalizer::{LabelSpec, TaskKind};
    use crate::store::{EmbeddingRecord, EmbeddingStore};

    fn spec() -> VerbalizerSpec {
        VerbalizerSpec {
            task_kind: TaskKind::ClosedSet,
            templates: vec!["It was {label}.".into()],
            labels: vec![
                LabelSpec {
                    class_index: 0,
                    name: "great".into(),
                    synonyms: vec!["good".into(), "fine".into()],
                },
                LabelSpec {
                    class_index: 1,
                    name: "terrible".into(),
                    synonyms: vec!["awful".into(), "bad".into()],
                },
            ],
        }
    }

    fn unit(angle: f32) -> Vec<f32> {
        vec![angle.cos(), angle.sin()]
    }

    fn prompts() -> EmbeddingStore {
        let texts = [
            ("It was great.", 0.0),
            ("It was good.", 0.1),
            ("It was fine.", 0.2),
            ("It was terrible.", 3.0),
            ("It was awful.", 3.1),
            ("It was bad.", 2.9),
        ];
        let recs: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, (t, a))| EmbeddingRecord::new(format!("p{i}"), *t, unit(*a)))
            .collect();
        EmbeddingStore::from_records(&recs, 2).unwrap().normalize().unwrap()
    }

    fn corpus() -> EmbeddingStore {
        let recs: Vec<_> = (0..40)
            .map(|i| EmbeddingRecord::new(format!("c{i}"), format!("sentence {i}"), unit(i as f32 * 0.157)))
            .collect();
        EmbeddingStore::from_records(&recs, 2).unwrap().normalize().unwrap()
    }

    #[test]
    fn mode_none_has_no_retrieved_entries() {
        let (p, c) = (prompts(), corpus());
        let idx = FlatIndex::new(&c).unwrap();
        let cfg = RetrievalConfig::none();
        let plan = plan_queries(&spec(), 0, &cfg).unwrap();
        let anchors = build_label_anchors(&p, &idx, &plan, &cfg).unwrap();
        assert_eq!(anchors.num_labels(), 2);
        assert!(anchors.labels.iter().all(|l| l.retrieved.is_empty()));
        assert_eq!(anchors.labels[1].prompt, "It was terrible.");
    }

    #[test]
    fn single_query_retrieves_k_from_the_prompt() {
        let (p, c) = (prompts(), corpus());
        let idx = FlatIndex::new(&c).unwrap();
        let cfg = RetrievalConfig::single_query(6);
        let plan = plan_queries(&spec(), 0, &cfg).unwrap();
        let anchors = build_label_anchors(&p, &idx, &plan, &cfg).unwrap();
        for label in &anchors.labels {
            assert_eq!(label.retrieved.len(), 6);
            assert!(label.retrieved.iter().all(|r| r.source_query == label.prompt));
        }
        let expected = idx.top_k(p.row(0), 6).unwrap();
        let got: Vec<usize> = anchors.labels[0].retrieved.iter().map(|r| r.row).collect();
        assert_eq!(got, expected.rows().collect::<Vec<_>>());
    }

    #[test]
    fn multi_synonym_groups_hits_per_query_and_keeps_duplicates() {
        let (p, c) = (prompts(), corpus());
        let idx = FlatIndex::new(&c).unwrap();
        let cfg = RetrievalConfig::multi_synonym(6, 3);
        let plan = plan_queries(&spec(), 0, &cfg).unwrap();
        let anchors = build_label_anchors(&p, &idx, &plan, &cfg).unwrap();
        let great = &anchors.labels[0];
        assert_eq!(great.retrieved.len(), 6);
        let sources: Vec<&str> = great.retrieved.iter().map(|r| r.source_query.as_str()).collect();
        assert_eq!(
            sources,
            vec!["It was great.", "It was great.", "It was good.", "It was good.", "It was fine.", "It was fine."]
        );
        // neighbouring queries share corpus rows; they are kept
        let mut rows: Vec<usize> = great.retrieved.iter().map(|r| r.row).collect();
        rows.sort_unstable();
        rows.dedup();
        assert!(rows.len() < 6);
    }

    #[test]
    fn rejects_indivisible_k_and_missing_prompts() {
        let (p, c) = (prompts(), corpus());
        let idx = FlatIndex::new(&c).unwrap();
        let cfg = RetrievalConfig::multi_synonym(25, 3);
        assert!(matches!(plan_queries(&spec(), 0, &cfg), Err(Error::InvalidArgument(_))));

        let cfg = RetrievalConfig::single_query(4);
        let mut plan = plan_queries(&spec(), 0, &cfg).unwrap();
        plan[1].queries[0] = "It was meh.".into();
        let err = build_label_anchors(&p, &idx, &plan, &cfg).unwrap_err();
        assert!(err.to_string().contains("It was meh."), "{err}");

        let bad = RetrievalConfig { mode: RetrievalMode::SingleQuery, k: 4, n: 2 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mode_parses_from_cli_spellings() {
        assert_eq!("multi-synonym".parse::<RetrievalMode>().unwrap(), RetrievalMode::MultiSynonym);
        assert_eq!("single_query".parse::<RetrievalMode>().unwrap(), RetrievalMode::SingleQuery);
        assert_eq!("none".parse::<RetrievalMode>().unwrap(), RetrievalMode::None);
        assert!("all".parse::<RetrievalMode>().is_err());
    }

    #[test]
    fn defaults_give_five_hits_per_synonym_query() {
        let cfg = RetrievalConfig::multi_synonym(DEFAULT_RETRIEVAL_SIZE, DEFAULT_SYNONYM_QUERIES);
        cfg.validate().unwrap();
        assert_eq!(cfg.per_query(), 5);
        assert_eq!(RetrievalConfig::single_query(DEFAULT_RETRIEVAL_SIZE).per_query(), 25);
    }
}
