//! Seeded synthetic embedding fixtures with known answers.
//!
//! The separable fixture places class `c` along the `c`-th coordinate axis.
//! Inputs lie within `input_max_angle` of their class axis, while prompts and
//! corpus sentences lie within `anchor_max_angle`. When
//! `input_max_angle + anchor_max_angle < 45°`, each input is closer to every
//! anchor of its own class than to any anchor of another class, so the
//! correct label wins under every retrieval mode. Corpus clusters hold at
//! least `K` rows, so retrieval for a class prompt only reaches its own
//! cluster.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::eval::{
    ClosedSetDataset, ClosedSetInstance, MultipleChoiceDataset, MultipleChoiceInstance,
};
use crate::scoring::{render, LabelSpec, TaskKind, VerbalizerSpec};
use crate::store::{EmbeddingRecord, EmbeddingStore};

/// Gaussian vector of the given dimension.
pub fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniformly random unit vector.
pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let g = gaussian(rng, dim);
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Unit vector at an angle drawn uniformly from `[0, max_angle]` radians
/// away from the unit vector `axis`, in a random orthogonal direction.
pub fn perturb(rng: &mut impl Rng, axis: &[f64], max_angle: f64) -> Vec<f64> {
    let dim = axis.len();
    let ortho = loop {
        let g = gaussian(rng, dim);
        let along: f64 = g.iter().zip(axis).map(|(a, b)| a * b).sum();
        let o: Vec<f64> = g.iter().zip(axis).map(|(a, b)| a - along * b).collect();
        let n = o.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            break o.into_iter().map(|x| x / n).collect::<Vec<_>>();
        }
    };
    let angle = rng.random_range(0.0..=max_angle);
    axis.iter()
        .zip(&ortho)
        .map(|(a, o)| angle.cos() * a + angle.sin() * o)
        .collect()
}

fn axis(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableConfig {
    pub dim: usize,
    pub classes: usize,
    pub templates: usize,
    pub synonyms: usize,
    pub test_per_class: usize,
    pub train_per_class: usize,
    pub corpus_per_class: usize,
    /// Rows placed on axes that belong to no class.
    pub corpus_background: usize,
    pub input_max_angle_deg: f64,
    pub anchor_max_angle_deg: f64,
    pub seed: u64,
}

impl Default for SeparableConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            classes: 2,
            templates: 1,
            synonyms: 4,
            test_per_class: 100,
            train_per_class: 30,
            corpus_per_class: 60,
            corpus_background: 40,
            input_max_angle_deg: 25.0,
            anchor_max_angle_deg: 10.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeparableFixture {
    pub verbalizer: VerbalizerSpec,
    pub prompts: EmbeddingStore,
    pub corpus: EmbeddingStore,
    pub test_inputs: EmbeddingStore,
    pub test: ClosedSetDataset,
    pub train_inputs: EmbeddingStore,
    pub train: ClosedSetDataset,
}

/// File locations written by [`SeparableFixture::write_to`].
#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub verbalizer: PathBuf,
    pub prompts: PathBuf,
    pub corpus: PathBuf,
    pub test_inputs: PathBuf,
    pub test: PathBuf,
    pub train_inputs: PathBuf,
    pub train: PathBuf,
}

impl SeparableFixture {
    pub fn generate(cfg: &SeparableConfig) -> Result<Self> {
        assert!(cfg.classes >= 1 && cfg.classes < cfg.dim, "need a spare axis per class");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let input_angle = cfg.input_max_angle_deg.to_radians();
        let anchor_angle = cfg.anchor_max_angle_deg.to_radians();
        let axes: Vec<Vec<f64>> = (0..cfg.classes).map(|c| axis(cfg.dim, c)).collect();

        let verbalizer = VerbalizerSpec {
            task_kind: TaskKind::ClosedSet,
            templates: (0..cfg.templates).map(|t| format!("Template {t}: {{label}}.")).collect(),
            labels: (0..cfg.classes)
                .map(|c| LabelSpec {
                    class_index: c,
                    name: format!("class{c}"),
                    synonyms: (1..=cfg.synonyms).map(|s| format!("class{c}-syn{s}")).collect(),
                })
                .collect(),
        };

        let mut prompt_recs = Vec::new();
        for template in &verbalizer.templates {
            for label in &verbalizer.labels {
                for word in std::iter::once(&label.name).chain(&label.synonyms) {
                    let v = perturb(&mut rng, &axes[label.class_index], anchor_angle);
                    let id = format!("p{}", prompt_recs.len());
                    prompt_recs.push(EmbeddingRecord::new(id, render(template, word), to_f32(&v)));
                }
            }
        }

        let mut corpus_recs = Vec::new();
        for (c, ax) in axes.iter().enumerate() {
            for i in 0..cfg.corpus_per_class {
                let v = perturb(&mut rng, ax, anchor_angle);
                corpus_recs.push(EmbeddingRecord::new(
                    format!("c{}", corpus_recs.len()),
                    format!("sentence about class{c} #{i}"),
                    to_f32(&v),
                ));
            }
        }
        let spare = cfg.dim - cfg.classes;
        for i in 0..cfg.corpus_background {
            let ax = axis(cfg.dim, cfg.classes + i % spare);
            let v = perturb(&mut rng, &ax, anchor_angle);
            corpus_recs.push(EmbeddingRecord::new(
                format!("c{}", corpus_recs.len()),
                format!("unrelated sentence #{i}"),
                to_f32(&v),
            ));
        }

        let mut split = |prefix: &str, per_class: usize| -> Result<(EmbeddingStore, ClosedSetDataset)> {
            let mut recs = Vec::new();
            let mut instances = Vec::new();
            for i in 0..per_class {
                for (c, ax) in axes.iter().enumerate() {
                    let id = format!("{prefix}{}", instances.len());
                    let v = perturb(&mut rng, ax, input_angle);
                    recs.push(EmbeddingRecord::new(id.clone(), format!("{prefix} text {i}/{c}"), to_f32(&v)));
                    instances.push(ClosedSetInstance { id, text: format!("{prefix} text {i}/{c}"), gold: c });
                }
            }
            Ok((
                EmbeddingStore::from_records(&recs, cfg.dim)?.normalize()?,
                ClosedSetDataset::new(instances, cfg.classes)?,
            ))
        };
        let (test_inputs, test) = split("x", cfg.test_per_class)?;
        let (train_inputs, train) = split("t", cfg.train_per_class)?;

        Ok(Self {
            verbalizer,
            prompts: EmbeddingStore::from_records(&prompt_recs, cfg.dim)?.normalize()?,
            corpus: EmbeddingStore::from_records(&corpus_recs, cfg.dim)?.normalize()?,
            test_inputs,
            test,
            train_inputs,
            train,
        })
    }

    /// Same geometry, but every test instance carries the next class as its
    /// gold label, so a correct classifier scores zero.
    pub fn with_inverted_gold(&self) -> Self {
        let m = self.test.num_classes();
        let instances = self
            .test
            .instances()
            .iter()
            .map(|i| ClosedSetInstance { gold: (i.gold + 1) % m, ..i.clone() })
            .collect();
        Self {
            test: ClosedSetDataset::new(instances, m).expect("labels stay in range"),
            ..self.clone()
        }
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<FixturePaths> {
        let dir = dir.as_ref();
        let paths = FixturePaths {
            verbalizer: dir.join("verbalizer.json"),
            prompts: dir.join("prompts"),
            corpus: dir.join("corpus"),
            test_inputs: dir.join("test"),
            test: dir.join("test.jsonl"),
            train_inputs: dir.join("train"),
            train: dir.join("train.jsonl"),
        };
        let json = serde_json::to_string_pretty(&self.verbalizer).expect("verbalizer serializes");
        std::fs::write(&paths.verbalizer, json)
            .map_err(|e| crate::error::Error::Io { path: paths.verbalizer.clone(), source: e })?;
        self.prompts.write(&paths.prompts)?;
        self.corpus.write(&paths.corpus)?;
        self.test_inputs.write(&paths.test_inputs)?;
        self.test.write_jsonl(&paths.test)?;
        self.train_inputs.write(&paths.train_inputs)?;
        self.train.write_jsonl(&paths.train)?;
        Ok(paths)
    }
}

/// Multiple-choice fixture in which the gold choice is planted closest to
/// the premise.
#[derive(Debug, Clone)]
pub struct PlantedChoiceFixture {
    pub dataset: MultipleChoiceDataset,
    pub premises: EmbeddingStore,
    pub choices: EmbeddingStore,
    pub corpus: EmbeddingStore,
}

impl PlantedChoiceFixture {
    /// `instances` questions with `choices` options each. The premise sits
    /// within 15° of its gold choice; distractor choices are independent
    /// random directions at least 60° away from the premise. The corpus holds
    /// `corpus_per_choice` rows within 10° of every choice.
    pub fn generate(
        instances: usize,
        choices: usize,
        dim: usize,
        corpus_per_choice: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mc = Vec::new();
        let mut premise_recs = Vec::new();
        let mut choice_recs = Vec::new();
        let mut corpus_recs = Vec::new();
        for i in 0..instances {
            let gold = rng.random_range(0..choices);
            let gold_dir = random_unit(&mut rng, dim);
            let premise = perturb(&mut rng, &gold_dir, 15f64.to_radians());
            let mut texts = Vec::new();
            for j in 0..choices {
                let dir = if j == gold {
                    gold_dir.clone()
                } else {
                    loop {
                        let d = random_unit(&mut rng, dim);
                        let cos: f64 = d.iter().zip(&premise).map(|(a, b)| a * b).sum();
                        if cos < 0.5 {
                            break d;
                        }
                    }
                };
                let text = format!("the answer is: option {j} of q{i}");
                choice_recs.push(EmbeddingRecord::new(format!("q{i}#{j}"), text.clone(), to_f32(&dir)));
                for r in 0..corpus_per_choice {
                    let v = perturb(&mut rng, &dir, 10f64.to_radians());
                    corpus_recs.push(EmbeddingRecord::new(
                        format!("c{}", corpus_recs.len()),
                        format!("corpus row {r} near q{i} option {j}"),
                        to_f32(&v),
                    ));
                }
                texts.push(format!("option {j} of q{i}"));
            }
            premise_recs.push(EmbeddingRecord::new(format!("q{i}"), format!("question {i}?"), to_f32(&premise)));
            mc.push(MultipleChoiceInstance {
                id: format!("q{i}"),
                premise: format!("question {i}?"),
                choices: texts,
                gold,
            });
        }
        Ok(Self {
            dataset: MultipleChoiceDataset::new(mc)?,
            premises: EmbeddingStore::from_records(&premise_recs, dim)?.normalize()?,
            choices: EmbeddingStore::from_records(&choice_recs, dim)?.normalize()?,
            corpus: EmbeddingStore::from_records(&corpus_recs, dim)?.normalize()?,
        })
    }
}
