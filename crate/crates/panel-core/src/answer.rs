//! Answer specifications, normalization, and final-answer extraction.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marker a solution must emit on the line carrying its answer.
pub const ANSWER_SENTINEL: &str = "FINAL ANSWER:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerKind {
    #[serde(rename = "integer_0_999")]
    Integer0To999,
    #[serde(rename = "multiple_choice")]
    MultipleChoice,
}

impl AnswerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnswerKind::Integer0To999 => "integer_0_999",
            AnswerKind::MultipleChoice => "multiple_choice",
        }
    }
}

/// What counts as a well-formed answer for a task, and how to canonicalize one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSpec {
    pub kind: AnswerKind,
    /// Valid labels for multiple choice, canonically uppercase. Absent for integers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerError {
    #[error("multiple_choice requires a non-empty choices list")]
    MissingChoices,
    #[error("duplicate choice label {0:?}")]
    DuplicateChoice(String),
    #[error("choice labels must be non-empty")]
    EmptyChoice,
    #[error("integer_0_999 does not take a choices list")]
    UnexpectedChoices,
    #[error("cannot normalize {raw:?} as {kind}")]
    Normalize { raw: String, kind: &'static str },
}

impl AnswerSpec {
    pub fn integer() -> Self {
        AnswerSpec { kind: AnswerKind::Integer0To999, choices: None }
    }

    pub fn multiple_choice<I, S>(labels: I) -> Result<Self, AnswerError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut choices: Vec<String> = Vec::new();
        for label in labels {
            let canon = label.as_ref().trim().to_uppercase();
            if canon.is_empty() {
                return Err(AnswerError::EmptyChoice);
            }
            if choices.iter().any(|c| c == &canon) {
                return Err(AnswerError::DuplicateChoice(canon));
            }
            choices.push(canon);
        }
        if choices.is_empty() {
            return Err(AnswerError::MissingChoices);
        }
        Ok(AnswerSpec { kind: AnswerKind::MultipleChoice, choices: Some(choices) })
    }

    pub fn validate(&self) -> Result<(), AnswerError> {
        match self.kind {
            AnswerKind::Integer0To999 => match &self.choices {
                None => Ok(()),
                Some(_) => Err(AnswerError::UnexpectedChoices),
            },
            AnswerKind::MultipleChoice => match &self.choices {
                Some(c) if !c.is_empty() => Ok(()),
                _ => Err(AnswerError::MissingChoices),
            },
        }
    }

    /// Canonicalizes a raw answer string: strips wrappers and leading zeros for
    /// integers, uppercases and matches labels for multiple choice.
    pub fn normalize(&self, raw: &str) -> Result<String, AnswerError> {
        let stripped = strip_wrappers(raw);
        let fail = || AnswerError::Normalize { raw: raw.to_string(), kind: self.kind.as_str() };
        match self.kind {
            AnswerKind::Integer0To999 => {
                let digits = stripped.strip_prefix('+').unwrap_or(stripped);
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(fail());
                }
                // Leading zeros are tolerated but capped so "0000...1" cannot
                // bypass the range check via overflow.
                if digits.len() > 12 {
                    return Err(fail());
                }
                let value: u64 = digits.parse().map_err(|_| fail())?;
                if value > 999 {
                    return Err(fail());
                }
                Ok(value.to_string())
            }
            AnswerKind::MultipleChoice => {
                let candidate = stripped.to_uppercase();
                let choices = self.choices.as_deref().unwrap_or(&[]);
                choices
                    .iter()
                    .find(|c| c.as_str() == candidate)
                    .cloned()
                    .ok_or_else(fail)
            }
        }
    }
}

/// Peels surrounding markup off an answer token: whitespace, `\boxed{..}`,
/// matched brackets, emphasis and math markers, and trailing punctuation.
pub fn strip_wrappers(raw: &str) -> &str {
    let mut s = raw.trim();
    loop {
        let before = s;
        for (open, close) in [("(", ")"), ("[", "]"), ("{", "}"), ("**", "**"), ("*", "*"), ("`", "`"), ("$", "$"), ("\"", "\""), ("'", "'")] {
            if s.len() > open.len() + close.len() - 1
                && s.starts_with(open)
                && s.ends_with(close)
            {
                s = &s[open.len()..s.len() - close.len()];
            }
        }
        if let Some(inner) = s.strip_prefix("\\boxed{").and_then(|r| r.strip_suffix('}')) {
            s = inner;
        }
        s = s.trim_end_matches(['.', ',', ';', ':', '!', '?']);
        s = s.trim();
        if s == before {
            return s;
        }
    }
}

/// Result of looking for a final answer in a completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractOutcome {
    /// Sentinel found and the trailing text normalized.
    Found(String),
    /// No sentinel line anywhere in the completion.
    NoSentinel,
    /// Sentinel found but the trailing text does not normalize.
    Malformed { raw: String },
}

/// Finds the byte offset just past the last case-insensitive occurrence of
/// `needle` in `haystack`. Both are treated as ASCII for case purposes.
fn rfind_ignore_ascii_case(haystack: &str, needle: &str) -> Option<usize> {
    let hay = haystack.as_bytes();
    let pat = needle.as_bytes();
    if pat.is_empty() || hay.len() < pat.len() {
        return None;
    }
    (0..=hay.len() - pat.len())
        .rev()
        .find(|&i| hay[i..i + pat.len()].eq_ignore_ascii_case(pat))
        .map(|i| i + pat.len())
}

/// Extraction with the failure reason preserved. The last sentinel occurrence
/// wins; only the remainder of that line is considered.
pub fn extract_outcome(completion: &str, spec: &AnswerSpec) -> ExtractOutcome {
    let Some(after) = rfind_ignore_ascii_case(completion, ANSWER_SENTINEL) else {
        return ExtractOutcome::NoSentinel;
    };
    let rest = &completion[after..];
    let line = rest.split(['\n', '\r']).next().unwrap_or("");
    match spec.normalize(line) {
        Ok(canon) => ExtractOutcome::Found(canon),
        Err(_) => ExtractOutcome::Malformed { raw: line.trim().to_string() },
    }
}

/// Extracts and canonicalizes the final answer, if any.
pub fn extract_final_answer(completion: &str, spec: &AnswerSpec) -> Option<String> {
    match extract_outcome(completion, spec) {
        ExtractOutcome::Found(ans) => Some(ans),
        _ => None,
    }
}
