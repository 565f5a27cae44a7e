use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slot replaced by a label word when rendering a template.
pub const PLACEHOLDER: &str = "{label}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Every instance shares the verbalizer's label set.
    ClosedSet,
    /// Each instance brings its own candidate answers; `labels` is unused.
    MultipleChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub class_index: usize,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

/// Templates plus label words, as read from a verbalizer JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerbalizerSpec {
    pub task_kind: TaskKind,
    pub templates: Vec<String>,
    #[serde(default)]
    pub labels: Vec<LabelSpec>,
}

impl VerbalizerSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Validation("verbalizer has no templates".into()));
        }
        for (i, t) in self.templates.iter().enumerate() {
            let n = t.matches(PLACEHOLDER).count();
            if n != 1 {
                return Err(Error::Validation(format!(
                    "template {i} ({t:?}) has {n} `{PLACEHOLDER}` slots, expected exactly one"
                )));
            }
        }
        if self.task_kind == TaskKind::ClosedSet && self.labels.is_empty() {
            return Err(Error::Validation("closed-set verbalizer has no labels".into()));
        }
        let mut seen = HashSet::new();
        for label in &self.labels {
            if label.name.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "label with class_index {} has an empty name",
                    label.class_index
                )));
            }
            if label.class_index >= self.labels.len() || !seen.insert(label.class_index) {
                return Err(Error::Validation(format!(
                    "class indices must be 0..{} without gaps or repeats (saw {})",
                    self.labels.len(),
                    label.class_index
                )));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    /// Labels in ascending class-index order.
    pub fn labels_by_class(&self) -> Vec<&LabelSpec> {
        let mut labels: Vec<&LabelSpec> = self.labels.iter().collect();
        labels.sort_by_key(|l| l.class_index);
        labels
    }

    pub fn label(&self, class_index: usize) -> Option<&LabelSpec> {
        self.labels.iter().find(|l| l.class_index == class_index)
    }

    pub fn template(&self, template_index: usize) -> Result<&str> {
        self.templates.get(template_index).map(String::as_str).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "template index {template_index} out of range ({} templates)",
                self.templates.len()
            ))
        })
    }
}

pub fn render(template: &str, word: &str) -> String {
    template.replacen(PLACEHOLDER, word, 1)
}

/// One prompt per label, in class-index order.
pub fn render_prompts(spec: &VerbalizerSpec, template_index: usize) -> Result<Vec<(usize, String)>> {
    let template = spec.template(template_index)?;
    Ok(spec
        .labels_by_class()
        .into_iter()
        .map(|l| (l.class_index, render(template, &l.name)))
        .collect())
}

/// The label's own prompt followed by prompts for its first `n - 1`
/// distinct synonyms.
pub fn expand_synonym_prompts(
    spec: &VerbalizerSpec,
    template_index: usize,
    class_index: usize,
    n: usize,
) -> Result<Vec<String>> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of synonym queries must be at least 1".into()));
    }
    let template = spec.template(template_index)?;
    let label = spec
        .label(class_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no label with class_index {class_index}")))?;

    let mut out = vec![render(template, &label.name)];
    let mut seen: HashSet<String> = out.iter().cloned().collect();
    for syn in &label.synonyms {
        if out.len() == n {
            break;
        }
        let prompt = render(template, syn);
        if seen.insert(prompt.clone()) {
            out.push(prompt);
        }
    }
    if out.len() < n {
        return Err(Error::Validation(format!(
            "label '{}' needs {} distinct synonyms for {n} queries but has {} (short by {})",
            label.name,
            n - 1,
            out.len() - 1,
            n - out.len()
        )));
    }
    Ok(out)
}
