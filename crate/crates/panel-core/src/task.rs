//! Tasks, datasets, and grading.
//!
//! Datasets are line-delimited JSON, one task per line. Field names follow the
//! on-disk format exactly: `id`, `prompt`, `domain`, `answer_kind`, `choices`
//! (multiple choice only), `gold`, and optional `source`. Unknown fields are
//! ignored with a warning.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::answer::{extract_outcome, AnswerSpec, ExtractOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Math,
    Physics,
    Chemistry,
    Biology,
    Other,
}

impl Domain {
    pub const ALL: [Domain; 5] =
        [Domain::Math, Domain::Physics, Domain::Chemistry, Domain::Biology, Domain::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Math => "math",
            Domain::Physics => "physics",
            Domain::Chemistry => "chemistry",
            Domain::Biology => "biology",
            Domain::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Domain> {
        Domain::ALL.iter().copied().find(|d| d.as_str() == s)
    }
}

impl core::fmt::Display for Domain {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub prompt: String,
    pub domain: Domain,
    pub answer_spec: AnswerSpec,
    /// Canonicalized gold answer.
    pub gold: String,
    /// Which benchmark the task came from; defaults to the dataset name.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task id must be non-empty")]
    EmptyId,
    #[error("task prompt must be non-empty")]
    EmptyPrompt,
    #[error("invalid answer spec: {0}")]
    Spec(#[from] crate::answer::AnswerError),
    #[error("gold answer {raw:?} does not normalize: {message}")]
    Gold { raw: String, message: String },
}

impl Task {
    pub fn new(
        id: impl Into<String>,
        prompt: impl Into<String>,
        domain: Domain,
        answer_spec: AnswerSpec,
        gold: &str,
        source: impl Into<String>,
    ) -> Result<Task, TaskError> {
        let id = id.into();
        let prompt = prompt.into();
        if id.trim().is_empty() {
            return Err(TaskError::EmptyId);
        }
        if prompt.trim().is_empty() {
            return Err(TaskError::EmptyPrompt);
        }
        answer_spec.validate()?;
        let gold = answer_spec
            .normalize(gold)
            .map_err(|e| TaskError::Gold { raw: gold.to_string(), message: format!("{e}") })?;
        Ok(Task { id, prompt, domain, answer_spec, gold, source: source.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradeFailure {
    NoAnswerFound,
    NormalizationFailed,
}

/// Outcome of grading one completion against a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted: Option<String>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<GradeFailure>,
}

/// Grades a completion: extracts the final answer, canonicalizes it, and
/// compares against the task's gold answer. Pure and deterministic.
pub fn grade(completion: &str, task: &Task) -> GradeResult {
    match extract_outcome(completion, &task.answer_spec) {
        ExtractOutcome::Found(extracted) => {
            let correct = extracted == task.gold;
            GradeResult { extracted: Some(extracted), correct, failure_reason: None }
        }
        ExtractOutcome::NoSentinel => GradeResult {
            extracted: None,
            correct: false,
            failure_reason: Some(GradeFailure::NoAnswerFound),
        },
        ExtractOutcome::Malformed { .. } => GradeResult {
            extracted: None,
            correct: false,
            failure_reason: Some(GradeFailure::NormalizationFailed),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub tasks: Vec<Task>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Non-fatal oddity noticed while parsing a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("dataset contains no tasks")]
    Empty,
    #[error("line {line}: not valid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: expected a JSON object")]
    NotObject { line: usize },
    #[error("line {line}: missing required field {field:?}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field {field:?} is invalid: {message}")]
    InvalidField { line: usize, field: &'static str, message: String },
    #[error("line {line}: duplicate task id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: task {id:?}: {message}")]
    Task { line: usize, id: String, message: String },
}

fn field_str(
    obj: &serde_json::Map<String, Value>,
    line: usize,
    field: &'static str,
) -> Result<String, DatasetError> {
    match obj.get(field) {
        None => Err(DatasetError::MissingField { line, field }),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(DatasetError::InvalidField {
            line,
            field,
            message: format!("expected a string, got {other}"),
        }),
    }
}

const KNOWN_FIELDS: [&str; 7] = ["id", "prompt", "domain", "answer_kind", "choices", "gold", "source"];

/// Parses a line-delimited JSON dataset. Blank lines are skipped; unknown
/// fields produce warnings rather than errors; task order is preserved.
pub fn parse_dataset(name: &str, text: &str) -> Result<(Dataset, Vec<ParseWarning>), DatasetError> {
    let mut tasks: Vec<Task> = Vec::new();
    let mut warnings: Vec<ParseWarning> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw_line)
            .map_err(|e| DatasetError::Json { line, message: e.to_string() })?;
        let obj = value.as_object().ok_or(DatasetError::NotObject { line })?;

        for key in obj.keys() {
            if !KNOWN_FIELDS.contains(&key.as_str()) {
                warnings.push(ParseWarning {
                    line,
                    message: format!("ignoring unknown field {key:?}"),
                });
            }
        }

        let id = field_str(obj, line, "id")?;
        if id.trim().is_empty() {
            return Err(DatasetError::InvalidField {
                line,
                field: "id",
                message: "must be non-empty".to_string(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(DatasetError::DuplicateId { line, id });
        }

        let prompt = field_str(obj, line, "prompt")?;
        let domain_raw = field_str(obj, line, "domain")?;
        let domain = Domain::parse(&domain_raw).ok_or_else(|| DatasetError::InvalidField {
            line,
            field: "domain",
            message: format!("unknown domain {domain_raw:?}"),
        })?;

        let kind_raw = field_str(obj, line, "answer_kind")?;
        let answer_spec = match kind_raw.as_str() {
            "integer_0_999" => {
                if obj.contains_key("choices") {
                    return Err(DatasetError::InvalidField {
                        line,
                        field: "choices",
                        message: "not allowed for integer_0_999".to_string(),
                    });
                }
                AnswerSpec::integer()
            }
            "multiple_choice" => {
                let choices = match obj.get("choices") {
                    Some(Value::Array(items)) => items
                        .iter()
                        .map(|v| match v {
                            Value::String(s) => Ok(s.clone()),
                            other => Err(DatasetError::InvalidField {
                                line,
                                field: "choices",
                                message: format!("expected strings, got {other}"),
                            }),
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                    Some(other) => {
                        return Err(DatasetError::InvalidField {
                            line,
                            field: "choices",
                            message: format!("expected an array, got {other}"),
                        })
                    }
                    None => return Err(DatasetError::MissingField { line, field: "choices" }),
                };
                AnswerSpec::multiple_choice(choices).map_err(|e| DatasetError::InvalidField {
                    line,
                    field: "choices",
                    message: e.to_string(),
                })?
            }
            other => {
                return Err(DatasetError::InvalidField {
                    line,
                    field: "answer_kind",
                    message: format!("unknown answer kind {other:?}"),
                })
            }
        };

        let gold = field_str(obj, line, "gold")?;
        let source = match obj.get("source") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                return Err(DatasetError::InvalidField {
                    line,
                    field: "source",
                    message: format!("expected a string, got {other}"),
                })
            }
            None => name.to_string(),
        };

        let task = Task::new(id.clone(), prompt, domain, answer_spec, &gold, source)
            .map_err(|e| DatasetError::Task { line, id, message: e.to_string() })?;
        tasks.push(task);
    }

    if tasks.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok((Dataset { name: name.to_string(), tasks }, warnings))
}

/// Renders a dataset back to its canonical line-delimited form: one JSON
/// object per task, keys in lexicographic order, no extra whitespace.
pub fn render_dataset(dataset: &Dataset) -> String {
    let mut out = String::new();
    for task in &dataset.tasks {
        let mut obj = json!({
            "id": task.id,
            "prompt": task.prompt,
            "domain": task.domain.as_str(),
            "answer_kind": task.answer_spec.kind.as_str(),
            "gold": task.gold,
            "source": task.source,
        });
        if let Some(choices) = &task.answer_spec.choices {
            obj["choices"] = json!(choices);
        }
        out.push_str(&obj.to_string());
        out.push('\n');
    }
    out
}
