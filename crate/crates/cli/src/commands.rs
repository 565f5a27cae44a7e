use std::path::Path;
use std::time::Instant;

use zsr_core::eval::{
    ablation_run, ablation_table, evaluate_closed_set, evaluate_multiple_choice, fewshot_table, report_table,
    run_few_shot, sensitivity_report, sensitivity_table, write_predictions_csv, ClosedSetDataset, ClosedSetTask,
    EvalReport, FewShotConfig, FewShotMethod, LabeledEmbeddings, MultipleChoiceDataset, MultipleChoiceTask,
};
use zsr_core::index::{load_index, save_index, CorpusIndex, FlatIndex, PartitionedIndex, TopK, DEFAULT_KMEANS_SEED};
use zsr_core::scoring::{build_label_anchors, plan_queries, RetrievalConfig, RetrievalMode, TaskKind, VerbalizerSpec};
use zsr_core::EmbeddingStore;

use crate::args::{BuildIndexArgs, ClassifyArgs, EvalArgs, FewShotArgs, IndexKind, MethodArg, RetrievalArgs, RetrieveArgs, ValidateArgs};
use crate::output::{write_atomic, write_json};
use crate::Failure;

type CmdResult = Result<(), Failure>;

fn open_index<'a>(corpus: &'a EmbeddingStore, path: Option<&Path>) -> Result<CorpusIndex<'a>, Failure> {
    Ok(match path {
        Some(p) => load_index(p, corpus)?,
        None => CorpusIndex::Flat(FlatIndex::new(corpus)?),
    })
}

fn retrieval_config(args: &RetrievalArgs, kind: TaskKind) -> Result<RetrievalConfig, Failure> {
    let mode = match &args.mode {
        Some(m) => m.parse::<RetrievalMode>()?,
        None => match kind {
            TaskKind::ClosedSet => RetrievalMode::MultiSynonym,
            TaskKind::MultipleChoice => RetrievalMode::SingleQuery,
        },
    };
    let config = match mode {
        RetrievalMode::None => RetrievalConfig::none(),
        RetrievalMode::SingleQuery => RetrievalConfig::single_query(args.top_k),
        RetrievalMode::MultiSynonym => RetrievalConfig::multi_synonym(args.top_k, args.num_synonyms),
    };
    config.validate()?;
    Ok(config)
}

fn require<'a>(path: &'a Option<std::path::PathBuf>, flag: &str, why: &str) -> Result<&'a Path, Failure> {
    path.as_deref()
        .ok_or_else(|| Failure::Usage(format!("--{flag} is required {why}")))
}

struct ClosedSetInputs {
    verbalizer: VerbalizerSpec,
    prompts: EmbeddingStore,
    inputs: EmbeddingStore,
    dataset: ClosedSetDataset,
    corpus: EmbeddingStore,
}

impl ClosedSetInputs {
    fn load(a: &EvalArgs, verbalizer: VerbalizerSpec) -> Result<Self, Failure> {
        let prompts = require(&a.prompts, "prompts", "for closed-set verbalizers")?;
        let dataset = ClosedSetDataset::load(&a.dataset, verbalizer.num_classes())?;
        Ok(Self {
            prompts: EmbeddingStore::read(prompts)?,
            inputs: EmbeddingStore::read(&a.test)?,
            corpus: EmbeddingStore::read(&a.corpus)?,
            dataset,
            verbalizer,
        })
    }

    fn task<'a>(&'a self, index: &'a dyn TopK) -> ClosedSetTask<'a> {
        ClosedSetTask {
            dataset: &self.dataset,
            inputs: &self.inputs,
            verbalizer: &self.verbalizer,
            prompts: &self.prompts,
            index,
        }
    }
}

fn closed_set_only(a: &EvalArgs, command: &str) -> Result<(ClosedSetInputs, RetrievalConfig), Failure> {
    let verbalizer = VerbalizerSpec::load(&a.verbalizer)?;
    if verbalizer.task_kind != TaskKind::ClosedSet {
        return Err(Failure::Usage(format!("{command} needs a closed-set verbalizer")));
    }
    let config = retrieval_config(&a.retrieval, TaskKind::ClosedSet)?;
    Ok((ClosedSetInputs::load(a, verbalizer)?, config))
}

/// Runs the evaluation matching the verbalizer's task kind.
fn run_evaluation(a: &EvalArgs, detail: bool) -> Result<EvalReport, Failure> {
    let verbalizer = VerbalizerSpec::load(&a.verbalizer)?;
    let config = retrieval_config(&a.retrieval, verbalizer.task_kind)?;
    match verbalizer.task_kind {
        TaskKind::ClosedSet => {
            let inputs = ClosedSetInputs::load(a, verbalizer)?;
            let index = open_index(&inputs.corpus, a.index.as_deref())?;
            Ok(evaluate_closed_set(&inputs.task(&index), &config, detail)?)
        }
        TaskKind::MultipleChoice => {
            let choices = require(&a.choices, "choices", "for multiple-choice verbalizers")?;
            let dataset = MultipleChoiceDataset::load(&a.dataset)?;
            let premises = EmbeddingStore::read(&a.test)?;
            let choices = EmbeddingStore::read(choices)?;
            let corpus = EmbeddingStore::read(&a.corpus)?;
            let index = open_index(&corpus, a.index.as_deref())?;
            let task = MultipleChoiceTask { dataset: &dataset, premises: &premises, choices: &choices, index: &index };
            Ok(evaluate_multiple_choice(&task, &config, detail)?)
        }
    }
}

pub fn build_index(a: &BuildIndexArgs, seed: Option<u64>) -> CmdResult {
    let corpus = EmbeddingStore::read(&a.corpus)?;
    let start = Instant::now();
    let index = match a.kind {
        IndexKind::Flat => CorpusIndex::Flat(FlatIndex::new(&corpus)?),
        IndexKind::Partitioned => CorpusIndex::Partitioned(PartitionedIndex::build(
            &corpus,
            a.partitions,
            a.probes,
            seed.unwrap_or(DEFAULT_KMEANS_SEED),
        )?),
    };
    let elapsed = start.elapsed();
    save_index(&index, &a.index)?;
    println!(
        "kind={} count={} dim={} build_ms={:.1}",
        index.kind(),
        corpus.len(),
        corpus.dim(),
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}

pub fn retrieve(a: &RetrieveArgs) -> CmdResult {
    let corpus = EmbeddingStore::read(&a.corpus)?;
    let index = open_index(&corpus, a.index.as_deref())?;
    let query_store = match &a.queries {
        Some(p) => Some(EmbeddingStore::read(p)?),
        None => None,
    };
    let queries = query_store.as_ref().unwrap_or(&corpus);
    let row = match (&a.query_id, &a.query_text) {
        (Some(id), _) => queries
            .position_of_id(id)
            .ok_or_else(|| Failure::Usage(format!("no row with id '{id}' in the query store")))?,
        (None, Some(text)) => queries
            .position_of_text(text)
            .ok_or_else(|| Failure::Usage(format!("no row with text {text:?} in the query store")))?,
        (None, None) => return Err(Failure::Usage("give --query-id or --query-text".into())),
    };
    let result = index.top_k(queries.row(row), a.top_k)?;
    for (rank, hit) in result.hits.iter().enumerate() {
        println!(
            "{}\t{:.6}\t{}\t{}",
            rank + 1,
            hit.similarity,
            corpus.id(hit.row),
            corpus.text(hit.row)
        );
    }
    Ok(())
}

pub fn evaluate(a: &EvalArgs) -> CmdResult {
    let report = run_evaluation(a, false)?;
    if let Some(out) = &a.output {
        write_json(out, &report)?;
    }
    print!("{}", report_table(&report));
    Ok(())
}

pub fn ablate(a: &EvalArgs) -> CmdResult {
    let (inputs, config) = closed_set_only(a, "ablate")?;
    let config = match config.mode {
        // Give the retrieval rows their usual sizes even if --mode none was passed.
        RetrievalMode::None => RetrievalConfig::multi_synonym(a.retrieval.top_k, a.retrieval.num_synonyms),
        _ => config,
    };
    let index = open_index(&inputs.corpus, a.index.as_deref())?;
    let report = ablation_run(&inputs.task(&index), &config)?;
    if let Some(out) = &a.output {
        write_json(out, &report)?;
    }
    print!("{}", ablation_table(&report));
    Ok(())
}

pub fn sensitivity(a: &EvalArgs) -> CmdResult {
    let (inputs, config) = closed_set_only(a, "sensitivity")?;
    let index = open_index(&inputs.corpus, a.index.as_deref())?;
    let report = sensitivity_report(&inputs.task(&index), &config)?;
    if let Some(out) = &a.output {
        write_json(out, &report)?;
    }
    print!("{}", sensitivity_table(&report));
    Ok(())
}

pub fn export_csv(a: &EvalArgs) -> CmdResult {
    let report = run_evaluation(a, true)?;
    match &a.output {
        Some(out) => write_atomic(out, |w| Ok(write_predictions_csv(&report, w)?)),
        None => Ok(write_predictions_csv(&report, std::io::stdout().lock())?),
    }
}

pub fn fewshot(a: &FewShotArgs, seed: Option<u64>) -> CmdResult {
    let num_classes = match (a.num_classes, &a.verbalizer) {
        (Some(n), _) => n,
        (None, Some(v)) => VerbalizerSpec::load(v)?.num_classes(),
        (None, None) => return Err(Failure::Usage("give --verbalizer or --num-classes".into())),
    };
    if a.shots.is_empty() {
        return Err(Failure::Usage("--shots needs at least one value".into()));
    }
    let support_store = EmbeddingStore::read(&a.support)?;
    let support_labels = ClosedSetDataset::load(&a.support_dataset, num_classes)?.golds();
    let query_store = EmbeddingStore::read(&a.test)?;
    let query_labels = ClosedSetDataset::load(&a.dataset, num_classes)?.golds();
    let support = LabeledEmbeddings { store: &support_store, labels: &support_labels, num_classes };
    let query = LabeledEmbeddings { store: &query_store, labels: &query_labels, num_classes };

    let methods: &[FewShotMethod] = match a.method {
        MethodArg::Prototypical => &[FewShotMethod::Prototypical],
        MethodArg::LinearProbe => &[FewShotMethod::LinearProbe],
        MethodArg::Both => &[FewShotMethod::Prototypical, FewShotMethod::LinearProbe],
    };
    let base = seed.unwrap_or(0);
    let mut reports = Vec::new();
    for &method in methods {
        for &shots in &a.shots {
            let config = FewShotConfig::new(method, shots, base, a.num_seeds);
            reports.push(run_few_shot(&support, &query, &config)?);
        }
    }
    if let Some(out) = &a.output {
        write_json(out, &reports)?;
    }
    print!("{}", fewshot_table(&reports));
    Ok(())
}

pub fn classify(a: &ClassifyArgs) -> CmdResult {
    let verbalizer = VerbalizerSpec::load(&a.verbalizer)?;
    if verbalizer.task_kind != TaskKind::ClosedSet {
        return Err(Failure::Usage("classify needs a closed-set verbalizer".into()));
    }
    let config = retrieval_config(&a.retrieval, TaskKind::ClosedSet)?;
    let prompts = EmbeddingStore::read(&a.prompts)?;
    let inputs = EmbeddingStore::read(&a.test)?;
    let corpus = EmbeddingStore::read(&a.corpus)?;
    let index = open_index(&corpus, a.index.as_deref())?;
    let row = inputs
        .position_of_id(&a.input_id)
        .ok_or_else(|| Failure::Usage(format!("no row with id '{}' in the input store", a.input_id)))?;

    let plan = plan_queries(&verbalizer, a.template, &config)?;
    let anchors = build_label_anchors(&prompts, &index, &plan, &config)?;
    let prediction = zsr_core::classify(inputs.row(row), &anchors)?;
    if let Some(out) = &a.output {
        write_json(out, &prediction)?;
    }
    println!("class\tdirect\tretrieval\ttotal\tlabel");
    for s in &prediction.scores {
        let name = verbalizer.label(s.class_index).map_or("?", |l| l.name.as_str());
        println!("{}\t{:.6}\t{:.6}\t{:.6}\t{name}", s.class_index, s.direct, s.retrieval, s.total);
    }
    let name = verbalizer.label(prediction.predicted).map_or("?", |l| l.name.as_str());
    println!("predicted={} ({name}) tie={}", prediction.predicted, prediction.tie);
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> CmdResult {
    let store = EmbeddingStore::read(&a.store)?;
    println!(
        "ok count={} dim={} normalized={}",
        store.len(),
        store.dim(),
        store.is_normalized()
    );
    Ok(())
}
