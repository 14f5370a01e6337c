//! Solution-level baselines: self-consistency and best-of-n selection with
//! or without natural-language critiques.

use serde::{Deserialize, Serialize};

use panel_core::answer::extract_final_answer;
use panel_core::chat::ChatRequest;
use panel_core::consensus::{majority_vote, VoteOutcome};
use panel_core::critique::{parse_critique, Correctness, Critique};
use panel_core::decision::{parse_selection, Decision};
use panel_core::prompts::{build_critique_messages, build_selection_messages, build_solution_messages, ReviewUnit};
use panel_core::task::{grade, GradeFailure, GradeResult, Task};

use crate::engine::EngineContext;
use crate::util::parallel_map;

/// One sampled complete solution, graded in isolation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionSample {
    pub index: usize,
    pub text: String,
    /// Canonical extracted answer, absent when the sample never concluded.
    pub extracted: Option<String>,
    pub correct: bool,
}

/// The record of one solution-level attempt: every sample, whatever critiques
/// and selection the method used, and the grade of the aggregate answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionOutcome {
    pub schema_version: u32,
    pub task_id: String,
    pub samples: Vec<SolutionSample>,
    /// One critique per sample for the critique-conditioned variant, else empty.
    pub critiques: Vec<Critique>,
    /// Vote tally for self-consistency, absent for selection methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote: Option<VoteOutcome>,
    /// Index of the selected sample, absent for self-consistency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_index: Option<usize>,
    pub decision_rationale: String,
    pub grade: GradeResult,
}

pub const SOLUTION_SCHEMA_VERSION: u32 = 1;

/// Samples `n` complete solutions at the configured temperature. A sample
/// whose call fails twice becomes an empty text with no extractable answer.
pub fn sample_solutions(ctx: &EngineContext, task: &Task, n: usize) -> Vec<SolutionSample> {
    let messages = build_solution_messages(task, ctx.pack);
    let texts = parallel_map(n, ctx.config.concurrency_limit, |i| {
        for attempt in 0..2 {
            let suffix = if attempt == 0 {
                format!("solution-sample-{i}")
            } else {
                format!("solution-sample-{i}-a{attempt}")
            };
            let request = ChatRequest {
                messages: messages.clone(),
                temperature: ctx.config.temperature,
                max_tokens: ctx.max_tokens_solution,
                stop: vec![],
                tag: ctx.tag(&suffix),
            };
            if let Ok(response) = ctx.providers.policy.complete(&request) {
                return response.content;
            }
        }
        String::new()
    });
    texts
        .into_iter()
        .enumerate()
        .map(|(index, text)| {
            let extracted = extract_final_answer(&text, &task.answer_spec);
            let correct = extracted.as_deref() == Some(task.gold.as_str());
            SolutionSample { index, text, extracted, correct }
        })
        .collect()
}

/// Majority vote over the extracted answers of `n` sampled solutions.
pub fn run_self_consistency(ctx: &EngineContext, task: &Task, n: usize) -> SolutionOutcome {
    let samples = sample_solutions(ctx, task, n);
    let vote = majority_vote(samples.iter().map(|s| s.extracted.as_deref()));
    let grade = GradeResult {
        correct: vote.answer.as_deref() == Some(task.gold.as_str()),
        extracted: vote.answer.clone(),
        failure_reason: vote.answer.is_none().then_some(GradeFailure::NoAnswerFound),
    };
    let rationale = if vote.tie {
        "majority vote (tie broken by sampling order)".to_string()
    } else {
        "majority vote".to_string()
    };
    SolutionOutcome {
        schema_version: SOLUTION_SCHEMA_VERSION,
        task_id: task.id.clone(),
        samples,
        critiques: Vec::new(),
        vote: Some(vote),
        chosen_index: None,
        decision_rationale: rationale,
        grade,
    }
}

fn critique_solutions(ctx: &EngineContext, task: &Task, samples: &[SolutionSample]) -> Vec<Critique> {
    parallel_map(samples.len(), ctx.config.concurrency_limit, |i| {
        let mut last = Critique::unparseable(i, "");
        for attempt in 0..=ctx.config.critique_retries {
            let request = ChatRequest {
                messages: build_critique_messages(task, &[], &samples[i].text, ReviewUnit::Solution, ctx.pack),
                temperature: ctx.config.temperature,
                max_tokens: ctx.config.max_tokens_critique,
                stop: vec![],
                tag: ctx.tag(&format!("solution-critique-{i}-a{attempt}")),
            };
            match ctx.providers.critic.complete(&request) {
                Ok(response) => {
                    last = parse_critique(&response.content, i);
                    if last.correctness != Correctness::Unparseable {
                        break;
                    }
                }
                Err(e) => {
                    last = Critique::unparseable(i, format!("[provider error: {e}]"));
                    break;
                }
            }
        }
        last
    })
}

/// Samples `n` solutions and asks the policy model to pick one, optionally
/// critiquing every candidate first and showing those assessments.
pub fn run_solution_select(ctx: &EngineContext, task: &Task, n: usize, with_critique: bool) -> SolutionOutcome {
    let samples = sample_solutions(ctx, task, n);
    let critiques = if with_critique { critique_solutions(ctx, task, &samples) } else { Vec::new() };

    let decision = if samples.len() == 1 {
        Decision::forced(0, "single candidate")
    } else {
        let texts: Vec<&str> = samples.iter().map(|s| s.text.as_str()).collect();
        let annotations: Option<Vec<&str>> =
            with_critique.then(|| critiques.iter().map(|c| c.annotation()).collect());
        let suffix = if with_critique { "solution-select-crit" } else { "solution-select-plain" };
        let request = ChatRequest {
            messages: build_selection_messages(task, &[], &texts, annotations.as_deref(), ReviewUnit::Solution, ctx.pack),
            temperature: 0.0,
            max_tokens: ctx.config.max_tokens_decision,
            stop: vec![],
            tag: ctx.tag(suffix),
        };
        match ctx.providers.policy.complete(&request) {
            Ok(response) => parse_selection(&response.content, samples.len(), 0),
            Err(e) => Decision::fallback(0, format!("[provider error: {e}]")),
        }
    };

    let grade = grade(&samples[decision.chosen_index].text, task);
    SolutionOutcome {
        schema_version: SOLUTION_SCHEMA_VERSION,
        task_id: task.id.clone(),
        samples,
        critiques,
        vote: None,
        chosen_index: Some(decision.chosen_index),
        decision_rationale: decision.rationale,
        grade,
    }
}
