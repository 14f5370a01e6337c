//! Search traces: the complete, serializable record of one task attempt.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critique::Critique;
use crate::task::GradeResult;

/// Marks the end of a solution; a step containing it terminates the search.
pub use crate::answer::ANSWER_SENTINEL;

/// True when a candidate step closes the solution with a final answer line.
pub fn is_terminal(candidate_text: &str) -> bool {
    let hay = candidate_text.as_bytes();
    let pat = ANSWER_SENTINEL.as_bytes();
    hay.len() >= pat.len()
        && (0..=hay.len() - pat.len()).any(|i| hay[i..i + pat.len()].eq_ignore_ascii_case(pat))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// The single temperature-zero candidate.
    Greedy,
    /// One of the temperature-sampled candidates.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCandidate {
    pub index: usize,
    pub text: String,
    pub origin: Origin,
    /// Lowest index of an earlier candidate with identical text, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<usize>,
}

/// The candidates proposed for one step, greedy first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// 1-based step number within the search.
    pub step_index: usize,
    pub candidates: Vec<StepCandidate>,
}

impl CandidateSet {
    /// Builds the set from ordered `(text, origin)` pairs, marking exact-text
    /// duplicates against the earliest occurrence.
    pub fn new(step_index: usize, texts: Vec<(String, Origin)>) -> CandidateSet {
        let mut candidates: Vec<StepCandidate> = Vec::with_capacity(texts.len());
        for (index, (text, origin)) in texts.into_iter().enumerate() {
            let duplicate_of = candidates.iter().find(|c| c.text == text).map(|c| c.index);
            candidates.push(StepCandidate { index, text, origin, duplicate_of });
        }
        CandidateSet { step_index, candidates }
    }

    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    /// Indices of candidates that are not duplicates of an earlier one.
    pub fn representatives(&self) -> Vec<usize> {
        self.candidates
            .iter()
            .filter(|c| c.duplicate_of.is_none())
            .map(|c| c.index)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub candidate_set: CandidateSet,
    /// One critique per candidate when the method critiques steps; empty for
    /// methods that never ask for critiques.
    pub critiques: Vec<Critique>,
    pub chosen_index: usize,
    /// What the selector would have picked without critiques, when computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterfactual_index: Option<usize>,
    pub decision_rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    FinalAnswer,
    MaxSteps,
    ProviderError,
}

/// Search hyperparameters. Defaults match the published setup: five
/// candidates per step, sampling temperature 0.6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Candidates per step, one greedy plus `k - 1` sampled.
    pub k: usize,
    /// Sampling temperature for non-greedy candidates and solution sampling.
    pub temperature: f64,
    pub max_steps: usize,
    pub max_tokens_step: u32,
    pub max_tokens_critique: u32,
    pub max_tokens_decision: u32,
    /// Also run the selector without critiques at each step, recording the
    /// counterfactual pick without letting it steer the search.
    pub compute_counterfactual: bool,
    /// Upper bound on concurrent provider calls issued within one task.
    pub concurrency_limit: usize,
    /// Re-asks after an unparseable critique, per candidate.
    pub critique_retries: usize,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            k: 5,
            temperature: 0.6,
            max_steps: 16,
            max_tokens_step: 512,
            max_tokens_critique: 512,
            max_tokens_decision: 256,
            compute_counterfactual: false,
            concurrency_limit: 4,
            critique_retries: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("k must be at least 1")]
    K,
    #[error("max_steps must be at least 1")]
    MaxSteps,
    #[error("temperature {0} is out of range [0, 2]")]
    Temperature(String),
    #[error("token budgets must be positive")]
    TokenBudget,
    #[error("concurrency_limit must be at least 1")]
    Concurrency,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::K);
        }
        if self.max_steps == 0 {
            return Err(ConfigError::MaxSteps);
        }
        if !(0.0..=2.0).contains(&self.temperature) || self.temperature.is_nan() {
            return Err(ConfigError::Temperature(self.temperature.to_string()));
        }
        if self.max_tokens_step == 0 || self.max_tokens_critique == 0 || self.max_tokens_decision == 0 {
            return Err(ConfigError::TokenBudget);
        }
        if self.concurrency_limit == 0 {
            return Err(ConfigError::Concurrency);
        }
        Ok(())
    }
}

/// What produced a trace: the search settings plus provider identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub search: SearchConfig,
    pub policy_model: String,
    pub critic_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub schema_version: u32,
    pub task_id: String,
    pub steps: Vec<StepRecord>,
    /// Concatenation of the chosen step texts, exactly as selected.
    pub final_text: String,
    pub grade: GradeResult,
    pub terminated_by: TerminationReason,
    pub config_snapshot: ConfigSnapshot,
}

impl SearchTrace {
    pub const SCHEMA_VERSION: u32 = 1;

    /// Rebuilds the final text from the per-step chosen candidates.
    pub fn reconstruct_final_text(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&step.candidate_set.candidates[step.chosen_index].text);
        }
        out
    }
}
