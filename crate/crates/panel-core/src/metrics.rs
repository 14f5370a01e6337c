//! Accuracy, unbiased pass@k, and critique divergence.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::Domain;
use crate::trace::SearchTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    SelfConsistency,
    SolutionSelect,
    SolutionSelectCritique,
    StepSelfEval,
    Panel,
}

impl Method {
    /// All methods, in the order reports list them.
    pub const ALL: [Method; 6] = [
        Method::Greedy,
        Method::SelfConsistency,
        Method::SolutionSelect,
        Method::SolutionSelectCritique,
        Method::StepSelfEval,
        Method::Panel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::SelfConsistency => "self_consistency",
            Method::SolutionSelect => "solution_select",
            Method::SolutionSelectCritique => "solution_select_critique",
            Method::StepSelfEval => "step_self_eval",
            Method::Panel => "panel",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.as_str() == s)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one task under one method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub method: Method,
    pub domain: Domain,
    /// Benchmark the task came from (for example "AIME2024").
    pub source: String,
    /// Outcome of the primary attempt.
    pub correct: bool,
    /// Per-attempt outcomes when the task was run several times for pass@k.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_outcomes: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no results to aggregate")]
    Empty,
    #[error("pass@k requires 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")]
    PassAtKDomain { n: u64, c: u64, k: u64 },
    #[error("pass@k requires every task to have at least k samples")]
    NotEnoughSamples,
}

/// Micro-averaged accuracy: correct count over total count.
pub fn accuracy(results: &[TaskResult]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    let correct = results.iter().filter(|r| r.correct).count();
    Ok(correct as f64 / results.len() as f64)
}

/// Accuracy within one named slice of results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub group: String,
    pub correct: usize,
    pub total: usize,
}

impl GroupAccuracy {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.correct as f64 / self.total as f64
    }
}

/// Accuracy per group under `key`, groups sorted by name. Pooling all groups
/// reproduces the micro-average exactly: totals add, fractions do not.
pub fn accuracy_by<F>(results: &[TaskResult], key: F) -> Vec<GroupAccuracy>
where
    F: Fn(&TaskResult) -> &str,
{
    let mut groups: Vec<GroupAccuracy> = Vec::new();
    for r in results {
        let name = key(r);
        let entry = match groups.iter_mut().find(|g| g.group == name) {
            Some(g) => g,
            None => {
                groups.push(GroupAccuracy { group: name.to_string(), correct: 0, total: 0 });
                groups.last_mut().unwrap()
            }
        };
        entry.total += 1;
        if r.correct {
            entry.correct += 1;
        }
    }
    groups.sort_by(|a, b| a.group.cmp(&b.group));
    groups
}

/// The micro-average over all results, as a group named "All".
pub fn pooled(results: &[TaskResult]) -> GroupAccuracy {
    GroupAccuracy {
        group: "All".to_string(),
        correct: results.iter().filter(|r| r.correct).count(),
        total: results.len(),
    }
}

/// Unbiased pass@k estimator: `1 - C(n-c, k) / C(n, k)` for `n` samples of
/// which `c` were correct, evaluated in product form so intermediate values
/// stay bounded.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, MetricsError> {
    if c > n || k == 0 || k > n {
        return Err(MetricsError::PassAtKDomain { n, c, k });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0_f64;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - k as f64 / i as f64;
    }
    Ok(1.0 - miss)
}

/// Mean pass@k across tasks, each task contributing its own estimate.
pub fn mean_pass_at_k(outcomes: &[Vec<bool>], k: u64) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sum = 0.0;
    for per_task in outcomes {
        let n = per_task.len() as u64;
        if n < k {
            return Err(MetricsError::NotEnoughSamples);
        }
        let c = per_task.iter().filter(|&&b| b).count() as u64;
        sum += pass_at_k(n, c, k)?;
    }
    Ok(sum / outcomes.len() as f64)
}

/// One step's critique-conditioned choice next to its no-critique counterfactual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceSample {
    pub task_id: String,
    /// 1-based step number.
    pub step_index: usize,
    pub chosen_index: usize,
    pub counterfactual_index: usize,
}

/// Divergence at one step position: how often the two selectors disagreed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceStat {
    pub step_index: usize,
    pub differing: usize,
    pub total: usize,
}

impl DivergenceStat {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.differing as f64 / self.total as f64
    }
}

/// Divergence ratios grouped by step position, sorted by step.
pub fn divergence_by_step(samples: &[DivergenceSample]) -> Vec<DivergenceStat> {
    let mut stats: Vec<DivergenceStat> = Vec::new();
    for s in samples {
        let entry = match stats.iter_mut().find(|d| d.step_index == s.step_index) {
            Some(d) => d,
            None => {
                stats.push(DivergenceStat { step_index: s.step_index, differing: 0, total: 0 });
                stats.last_mut().unwrap()
            }
        };
        entry.total += 1;
        if s.chosen_index != s.counterfactual_index {
            entry.differing += 1;
        }
    }
    stats.sort_by_key(|d| d.step_index);
    stats
}

/// Pulls divergence samples out of a trace; steps without a recorded
/// counterfactual contribute nothing.
pub fn divergence_samples_from_trace(trace: &SearchTrace) -> Vec<DivergenceSample> {
    trace
        .steps
        .iter()
        .filter_map(|step| {
            step.counterfactual_index.map(|cf| DivergenceSample {
                task_id: trace.task_id.clone(),
                step_index: step.candidate_set.step_index,
                chosen_index: step.chosen_index,
                counterfactual_index: cf,
            })
        })
        .collect()
}

/// Renders a fraction as a percentage with one decimal place, e.g. "25.8".
pub fn percent_1dp(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}
