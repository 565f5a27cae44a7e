//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::HashSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsr_core::eval::{ablation_run, evaluate_closed_set, ClosedSetTask, SoftmaxRegression};
use zsr_core::index::{flat_top_k, FlatIndex, PartitionedIndex, TopK};
use zsr_core::scoring::{
    build_anchors_from_queries, build_label_anchors, classify, plan_queries, score_direct, score_retrieval,
    LabelQuery, LabelSpec, QueryPrompt, RetrievalConfig, RetrievalMode, TaskKind, VerbalizerSpec,
};
use zsr_core::store::{EmbeddingRecord, EmbeddingStore};
use zsr_core::synthetic::{gaussian, random_unit, SeparableConfig, SeparableFixture};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn to_f32(v: Vec<f64>) -> Vec<f32> {
    v.into_iter().map(|x| x as f32).collect()
}

fn unit_store(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingStore {
    let recs: Vec<_> = (0..n)
        .map(|i| EmbeddingRecord::new(format!("r{i}"), format!("row {i}"), to_f32(random_unit(rng, dim))))
        .collect();
    EmbeddingStore::from_records(&recs, dim).unwrap().normalize().unwrap()
}

/// Independent brute force: plain dot products, full sort.
fn brute_force(store: &EmbeddingStore, q: &[f32], k: usize) -> Vec<usize> {
    let mut all: Vec<(usize, f64)> = (0..store.len())
        .map(|i| {
            let mut s = 0.0f64;
            for (a, b) in store.row(i).iter().zip(q) {
                s += *a as f64 * *b as f64;
            }
            (i, s)
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.into_iter().take(k).map(|x| x.0).collect()
}

/// The seeded uniform fixture shared by the two index criteria.
fn uniform_fixture() -> (EmbeddingStore, Vec<Vec<f32>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0001);
    let store = unit_store(&mut rng, 10_000, 64);
    let queries = (0..200).map(|_| to_f32(random_unit(&mut rng, 64))).collect();
    (store, queries)
}

fn top_k_oracle() -> Outcome {
    let (store, queries) = uniform_fixture();
    let start = Instant::now();
    let index = FlatIndex::new(&store).unwrap();
    let mut mismatches = 0;
    for q in &queries {
        for k in [1, 5, 25] {
            let got: Vec<usize> = flat_top_k(&index, q, k).unwrap().rows().collect();
            if got != brute_force(&store, q, k) {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 10.0,
        format!("{mismatches} of 600 query/k pairs differ; {secs:.2}s (limit 10s)"),
    )
}

fn approximate_index() -> Outcome {
    let (store, queries) = uniform_fixture();
    let flat = FlatIndex::new(&store).unwrap();
    let full = PartitionedIndex::build(&store, 32, 32, zsr_core::index::DEFAULT_KMEANS_SEED).unwrap();
    let exact = queries
        .iter()
        .all(|q| full.top_k(q, 25).unwrap() == flat.top_k(q, 25).unwrap());

    let mut found = 0usize;
    for q in &queries {
        let truth: HashSet<usize> = flat.top_k(q, 25).unwrap().rows().collect();
        found += full.search(q, 25, 8).unwrap().rows().filter(|r| truth.contains(r)).count();
    }
    let recall = found as f64 / (25 * queries.len()) as f64;
    outcome(
        exact && recall >= 0.9,
        format!("probes=P exact: {exact}; recall@25 at P=32, probes=8: {recall:.3} (need >= 0.9)"),
    )
}

fn naive_cos(a: &[f32], b: &[f32]) -> f64 {
    let (mut d, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..a.len() {
        d += a[i] as f64 * b[i] as f64;
        na += a[i] as f64 * a[i] as f64;
        nb += b[i] as f64 * b[i] as f64;
    }
    d / (na.sqrt() * nb.sqrt())
}

fn score_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0003);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dim = rng.random_range(4..=48);
        let m = rng.random_range(2..=10);
        let k = rng.random_range(1..=25);
        let rows = 40 + rng.random_range(0..60);
        let corpus = unit_store(&mut rng, rows, dim);
        let index = FlatIndex::new(&corpus).unwrap();
        let queries: Vec<LabelQuery> = (0..m)
            .map(|c| {
                let prompt = QueryPrompt { text: format!("label {c}"), embedding: to_f32(random_unit(&mut rng, dim)) };
                LabelQuery { class_index: c, prompt: prompt.clone(), queries: vec![prompt] }
            })
            .collect();
        let config = RetrievalConfig::single_query(k);
        let anchors = build_anchors_from_queries(&queries, &index, &config).unwrap();
        let h = to_f32(gaussian(&mut rng, dim));
        let direct = score_direct(&h, &anchors).unwrap();
        let retrieval = score_retrieval(&h, &anchors).unwrap();
        for (c, q) in queries.iter().enumerate() {
            let want_d = naive_cos(&h, &q.prompt.embedding);
            let rows = brute_force(&corpus, &q.prompt.embedding, k);
            let want_r = rows.iter().map(|&r| naive_cos(&h, corpus.row(r))).sum::<f64>() / rows.len() as f64;
            worst = worst.max((direct[c] - want_d).abs()).max((retrieval[c] - want_r).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max abs deviation {worst:.3e} (tolerance 1e-10)"))
}

fn scale_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0004);
    let dim = 16;
    let labels = 5;
    let raw = |rng: &mut ChaCha8Rng| -> Vec<f32> {
        let scale = rng.random_range(0.2..5.0);
        gaussian(rng, dim).into_iter().map(|x| (x * scale) as f32).collect()
    };
    let mut prompt_vecs: Vec<Vec<f32>> = (0..labels).map(|_| raw(&mut rng)).collect();
    // Two identical labels keep tie flags in play.
    prompt_vecs[4] = prompt_vecs[3].clone();
    let corpus_vecs: Vec<Vec<f32>> = (0..300).map(|_| raw(&mut rng)).collect();
    let inputs: Vec<Vec<f32>> = (0..100).map(|_| raw(&mut rng)).collect();
    let spec = VerbalizerSpec {
        task_kind: TaskKind::ClosedSet,
        templates: vec!["It is {label}.".into()],
        labels: (0..labels)
            .map(|c| LabelSpec { class_index: c, name: format!("l{c}"), synonyms: vec![] })
            .collect(),
    };
    let config = RetrievalConfig::single_query(10);

    let run = |c: f32| -> Vec<(usize, bool)> {
        let store = |vecs: &[Vec<f32>], text: &dyn Fn(usize) -> String| {
            let recs: Vec<_> = vecs
                .iter()
                .enumerate()
                .map(|(i, v)| EmbeddingRecord::new(format!("{i}"), text(i), v.iter().map(|x| x * c).collect()))
                .collect();
            EmbeddingStore::from_records(&recs, dim).unwrap().normalize().unwrap()
        };
        let prompts = store(&prompt_vecs, &|i| format!("It is l{i}."));
        let corpus = store(&corpus_vecs, &|i| format!("row {i}"));
        let index = FlatIndex::new(&corpus).unwrap();
        let plan = plan_queries(&spec, 0, &config).unwrap();
        let anchors = build_label_anchors(&prompts, &index, &plan, &config).unwrap();
        inputs
            .iter()
            .map(|h| {
                let scaled: Vec<f32> = h.iter().map(|x| x * c).collect();
                let norm = scaled.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                let unit: Vec<f32> = scaled.iter().map(|x| (*x as f64 / norm) as f32).collect();
                let p = classify(&unit, &anchors).unwrap();
                (p.predicted, p.tie)
            })
            .collect()
    };
    let base = run(1.0);
    let ties = base.iter().filter(|p| p.1).count();
    let changed: usize = [1e-3f32, 1e3].iter().map(|&c| run(c).iter().zip(&base).filter(|(a, b)| a != b).count()).sum();
    outcome(
        changed == 0,
        format!("{changed} of 200 scaled predictions differ from c=1 ({ties} tied instances at c=1)"),
    )
}

fn separable_end_to_end() -> Outcome {
    let fx = SeparableFixture::generate(&SeparableConfig::default()).unwrap();
    let index = FlatIndex::new(&fx.corpus).unwrap();
    let task = ClosedSetTask {
        dataset: &fx.test,
        inputs: &fx.test_inputs,
        verbalizer: &fx.verbalizer,
        prompts: &fx.prompts,
        index: &index,
    };
    let ablation = ablation_run(&task, &RetrievalConfig::multi_synonym(25, 5)).unwrap();
    let accs: Vec<f64> = RetrievalMode::ALL.iter().map(|&m| ablation.get(m).mean).collect();

    let none = evaluate_closed_set(&task, &RetrievalConfig::none(), true).unwrap();
    let prompt_rows: Vec<usize> = (0..2)
        .map(|c| fx.prompts.position_of_text(&format!("Template 0: class{c}.")).unwrap())
        .collect();
    let direct_agrees = none.predictions.unwrap().iter().enumerate().all(|(i, p)| {
        let s: Vec<f64> = prompt_rows.iter().map(|&r| naive_cos(fx.test_inputs.row(i), fx.prompts.row(r))).collect();
        p.predicted == if s[1] > s[0] { 1 } else { 0 }
    });
    outcome(
        accs.iter().all(|&a| a == 1.0) && direct_agrees,
        format!("accuracy none/single/multi = {accs:?}; mode none equals direct argmax: {direct_agrees}"),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0006);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let classes = rng.random_range(2..=5);
        let dim = rng.random_range(1..=16);
        let n = rng.random_range(2..=10);
        let xs: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let params: Vec<f64> = (0..classes * (dim + 1)).map(|_| rng.random_range(-0.5..0.5)).collect();
        let l2 = 1e-4;
        let loss = |p: Vec<f64>| SoftmaxRegression::from_params(classes, dim, p).unwrap().loss_and_gradient(&xs, &ys, l2).0;
        let (_, grad) = SoftmaxRegression::from_params(classes, dim, params.clone())
            .unwrap()
            .loss_and_gradient(&xs, &ys, l2);
        let h = 1e-4;
        let fd: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut up = params.clone();
                up[i] += h;
                let mut down = params.clone();
                down[i] -= h;
                (loss(up) - loss(down)) / (2.0 * h)
            })
            .collect();
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(diff / (norm(&grad) + norm(&fd)));
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.3e} (limit 1e-5)"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let fx = SeparableFixture::generate(&SeparableConfig {
        classes: 3,
        input_max_angle_deg: 70.0,
        ..Default::default()
    })
    .unwrap();
    let p = fx.write_to(dir.path()).unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let eval = |cmd: &str| -> Vec<String> {
        [cmd, "--verbalizer", &s(&p.verbalizer), "--prompts", &s(&p.prompts), "--test", &s(&p.test_inputs),
            "--dataset", &s(&p.test), "--corpus", &s(&p.corpus)]
            .iter()
            .map(|x| x.to_string())
            .collect()
    };
    let fewshot: Vec<String> = ["fewshot", "--support", &s(&p.train_inputs), "--support-dataset", &s(&p.train),
        "--test", &s(&p.test_inputs), "--dataset", &s(&p.test), "--verbalizer", &s(&p.verbalizer),
        "--num-seeds", "10"]
        .iter()
        .map(|x| x.to_string())
        .collect();

    let mut differing = Vec::new();
    for (name, args) in [("evaluate", eval("evaluate")), ("ablate", eval("ablate")), ("fewshot", fewshot)] {
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "4", "4", "1"].iter().enumerate() {
            let out = dir.path().join(format!("{name}-{run}.json"));
            let status = Command::new(env!("CARGO_BIN_EXE_zsr"))
                .args(&args)
                .args(["--seed", "7", "--threads", threads, "--output", out.to_str().unwrap()])
                .output()
                .unwrap();
            if !status.status.success() {
                return outcome(false, format!("{name} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(std::fs::read(&out).unwrap());
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("reports differing across runs/thread counts: {differing:?} (runs at --threads 1,4,4,1)"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("top-k oracle equivalence", top_k_oracle),
        ("approximate-index exactness limit", approximate_index),
        ("direct/retrieval score oracle equivalence", score_oracle),
        ("argmax scale invariance", scale_invariance),
        ("end-to-end separable fixture", separable_end_to_end),
        ("linear-probe gradient check", gradient_check),
        ("report determinism across runs and threads", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
