//! Line-delimited JSON datasets.
//!
//! Closed-set rows: `{"id": .., "text": .., "label": <class index>}`.
//! Multiple-choice rows: `{"id": .., "premise": .., "choices": [..], "answer": <index>}`.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedSetInstance {
    pub id: String,
    pub text: String,
    #[serde(rename = "label")]
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedSetDataset {
    instances: Vec<ClosedSetInstance>,
    num_classes: usize,
}

impl ClosedSetDataset {
    pub fn new(instances: Vec<ClosedSetInstance>, num_classes: usize) -> Result<Self> {
        check_unique(instances.iter().map(|i| i.id.as_str()))?;
        if let Some(bad) = instances.iter().find(|i| i.gold >= num_classes) {
            return Err(Error::Validation(format!(
                "instance '{}' has label {} but there are {num_classes} classes",
                bad.id, bad.gold
            )));
        }
        Ok(Self { instances, num_classes })
    }

    pub fn load(path: impl AsRef<Path>, num_classes: usize) -> Result<Self> {
        Self::new(read_jsonl(path.as_ref())?, num_classes)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(path.as_ref(), &self.instances)
    }

    pub fn instances(&self) -> &[ClosedSetInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn golds(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.gold).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipleChoiceInstance {
    pub id: String,
    pub premise: String,
    pub choices: Vec<String>,
    #[serde(rename = "answer")]
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultipleChoiceDataset {
    instances: Vec<MultipleChoiceInstance>,
}

impl MultipleChoiceDataset {
    pub fn new(instances: Vec<MultipleChoiceInstance>) -> Result<Self> {
        check_unique(instances.iter().map(|i| i.id.as_str()))?;
        for inst in &instances {
            if inst.choices.len() < 2 {
                return Err(Error::Validation(format!(
                    "instance '{}' has {} choices, need at least 2",
                    inst.id,
                    inst.choices.len()
                )));
            }
            if inst.gold >= inst.choices.len() {
                return Err(Error::Validation(format!(
                    "instance '{}' answer {} is outside its {} choices",
                    inst.id,
                    inst.gold,
                    inst.choices.len()
                )));
            }
        }
        Ok(Self { instances })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(read_jsonl(path.as_ref())?)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(path.as_ref(), &self.instances)
    }

    pub fn instances(&self) -> &[MultipleChoiceInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Total number of choices, i.e. the row count of an aligned choice store.
    pub fn total_choices(&self) -> usize {
        self.instances.iter().map(|i| i.choices.len()).sum()
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Validation(format!("duplicate instance id '{id}'")));
        }
    }
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row).expect("dataset rows serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_set_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        fs::write(
            &path,
            "{\"id\":\"a\",\"text\":\"good film\",\"label\":0}\n\n{\"id\":\"b\",\"text\":\"bad\",\"label\":1}\n",
        )
        .unwrap();
        let ds = ClosedSetDataset::load(&path, 2).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.golds(), vec![0, 1]);
        assert!(ClosedSetDataset::load(&path, 1).is_err());

        let out = dir.path().join("o.jsonl");
        ds.write_jsonl(&out).unwrap();
        assert_eq!(ClosedSetDataset::load(&out, 2).unwrap(), ds);
    }

    #[test]
    fn rejects_duplicates_and_bad_json() {
        let dup = vec![
            ClosedSetInstance { id: "a".into(), text: String::new(), gold: 0 },
            ClosedSetInstance { id: "a".into(), text: String::new(), gold: 0 },
        ];
        assert!(ClosedSetDataset::new(dup, 1).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, "{\"id\":\"a\"}\n").unwrap();
        let err = ClosedSetDataset::load(&path, 2).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn multiple_choice_validation() {
        let ok = MultipleChoiceInstance {
            id: "q".into(),
            premise: "What carries oxygen throughout the body?".into(),
            choices: vec!["red blood cells".into(), "bones".into()],
            gold: 0,
        };
        let ds = MultipleChoiceDataset::new(vec![ok.clone()]).unwrap();
        assert_eq!(ds.total_choices(), 2);

        let mut one = ok.clone();
        one.choices.truncate(1);
        assert!(MultipleChoiceDataset::new(vec![one]).is_err());
        let mut out_of_range = ok;
        out_of_range.gold = 2;
        assert!(MultipleChoiceDataset::new(vec![out_of_range]).is_err());
    }
}
