//! The step-level search engine and its step-scoped baselines.
//!
//! One search step runs three stages: candidate sampling (one greedy, the
//! rest at temperature), natural-language critique of every candidate, and a
//! critique-conditioned selection by the policy model. Chosen steps append to
//! the history until a candidate carries the final-answer sentinel or the
//! step budget runs out.

use std::sync::Arc;

use panel_core::chat::ChatRequest;
use panel_core::critique::{parse_critique, Correctness, Critique};
use panel_core::decision::{parse_score, parse_selection, select_argmax, Decision, SelfEvalScore};
use panel_core::prompts::{
    build_critique_messages, build_score_messages, build_selection_messages, build_solution_messages,
    build_step_messages, PromptPack, ReviewUnit,
};
use panel_core::task::{grade, Task};
use panel_core::trace::{
    is_terminal, CandidateSet, ConfigSnapshot, Origin, SearchConfig, SearchTrace, StepRecord,
    TerminationReason,
};

use crate::provider::{ChatProvider, ProviderError};
use crate::util::parallel_map;

pub struct Providers {
    pub policy: Arc<dyn ChatProvider>,
    pub critic: Arc<dyn ChatProvider>,
}

/// Everything one task attempt needs. The tag prefix scopes every request
/// tag to the task (and repetition) so replay logs stay collision-free.
pub struct EngineContext<'a> {
    pub config: &'a SearchConfig,
    pub pack: &'a PromptPack,
    pub providers: &'a Providers,
    pub tag_prefix: String,
    pub max_tokens_solution: u32,
}

impl<'a> EngineContext<'a> {
    pub fn new(
        config: &'a SearchConfig,
        pack: &'a PromptPack,
        providers: &'a Providers,
        task_id: &str,
    ) -> EngineContext<'a> {
        EngineContext {
            config,
            pack,
            providers,
            tag_prefix: format!("task={task_id}"),
            max_tokens_solution: 4096,
        }
    }

    pub(crate) fn tag(&self, suffix: &str) -> String {
        format!("{};{}", self.tag_prefix, suffix)
    }

    pub(crate) fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            search: self.config.clone(),
            policy_model: self.providers.policy.descriptor(),
            critic_model: self.providers.critic.descriptor(),
        }
    }
}

/// Stage 1: one greedy candidate plus `k - 1` sampled ones, in index order.
/// A greedy failure aborts the step; a sampled candidate that fails its call
/// and one retry degrades to a duplicate of the greedy candidate.
pub fn sample_candidates(
    ctx: &EngineContext,
    task: &Task,
    history: &[String],
    step_index: usize,
) -> Result<CandidateSet, ProviderError> {
    let messages = build_step_messages(task, history, ctx.pack);
    let greedy_request = ChatRequest {
        messages: messages.clone(),
        temperature: 0.0,
        max_tokens: ctx.config.max_tokens_step,
        stop: vec![],
        tag: ctx.tag(&format!("step={step_index};stage1-greedy")),
    };
    let greedy = ctx.providers.policy.complete(&greedy_request)?;

    let sampled = parallel_map(ctx.config.k - 1, ctx.config.concurrency_limit, |j| {
        let i = j + 1;
        for attempt in 0..2 {
            let suffix = if attempt == 0 {
                format!("step={step_index};stage1-sample-{i}")
            } else {
                format!("step={step_index};stage1-sample-{i}-a{attempt}")
            };
            let request = ChatRequest {
                messages: messages.clone(),
                temperature: ctx.config.temperature,
                max_tokens: ctx.config.max_tokens_step,
                stop: vec![],
                tag: ctx.tag(&suffix),
            };
            if let Ok(response) = ctx.providers.policy.complete(&request) {
                return Some(response.content);
            }
        }
        None
    });

    let mut texts = Vec::with_capacity(ctx.config.k);
    texts.push((greedy.content.clone(), Origin::Greedy));
    for content in sampled {
        texts.push((content.unwrap_or_else(|| greedy.content.clone()), Origin::Sampled));
    }
    Ok(CandidateSet::new(step_index, texts))
}

/// Stage 2: one critique per candidate. Duplicates share their
/// representative's critique instead of paying for another critic call; an
/// unparseable verdict is re-asked up to `critique_retries` times; a provider
/// failure records an unparseable critique rather than aborting the step.
pub fn critique_candidates(
    ctx: &EngineContext,
    task: &Task,
    history: &[String],
    set: &CandidateSet,
) -> Vec<Critique> {
    let reps = set.representatives();
    let step_index = set.step_index;
    let rep_critiques = parallel_map(reps.len(), ctx.config.concurrency_limit, |j| {
        let i = reps[j];
        let candidate = &set.candidates[i];
        let mut last = Critique::unparseable(i, "");
        for attempt in 0..=ctx.config.critique_retries {
            let request = ChatRequest {
                messages: build_critique_messages(task, history, &candidate.text, ReviewUnit::Step, ctx.pack),
                temperature: ctx.config.temperature,
                max_tokens: ctx.config.max_tokens_critique,
                stop: vec![],
                tag: ctx.tag(&format!("step={step_index};stage2-critique-c{i}-a{attempt}")),
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
    });

    let mut by_rep: Vec<Option<Critique>> = vec![None; set.k()];
    for critique in rep_critiques {
        let index = critique.candidate_index;
        by_rep[index] = Some(critique);
    }
    set.candidates
        .iter()
        .map(|c| match c.duplicate_of {
            Some(rep) => by_rep[rep].as_ref().expect("representative critiqued").with_index(c.index),
            None => by_rep[c.index].clone().expect("representative critiqued"),
        })
        .collect()
}

fn select(
    ctx: &EngineContext,
    task: &Task,
    history: &[String],
    set: &CandidateSet,
    annotations: Option<Vec<&str>>,
    unit: ReviewUnit,
    tag_suffix: &str,
) -> Decision {
    if set.k() == 1 {
        return Decision::forced(0, "single candidate");
    }
    let texts: Vec<&str> = set.candidates.iter().map(|c| c.text.as_str()).collect();
    let request = ChatRequest {
        messages: build_selection_messages(task, history, &texts, annotations.as_deref(), unit, ctx.pack),
        temperature: 0.0,
        max_tokens: ctx.config.max_tokens_decision,
        stop: vec![],
        tag: ctx.tag(tag_suffix),
    };
    match ctx.providers.policy.complete(&request) {
        Ok(response) => parse_selection(&response.content, set.k(), 0),
        Err(e) => Decision::fallback(0, format!("[provider error: {e}]")),
    }
}

/// Stage 3: critique-conditioned selection. Unusable replies and provider
/// failures fall back to the greedy candidate, flagged in the decision.
pub fn select_with_critiques(
    ctx: &EngineContext,
    task: &Task,
    history: &[String],
    set: &CandidateSet,
    critiques: &[Critique],
) -> Decision {
    let annotations: Vec<&str> = critiques.iter().map(|c| c.annotation()).collect();
    let suffix = format!("step={};stage3-decide-crit", set.step_index);
    select(ctx, task, history, set, Some(annotations), ReviewUnit::Step, &suffix)
}

/// The same selection prompt minus the critique annotations, for
/// counterfactual probes of how much the critiques change the choice.
pub fn select_without_critiques(
    ctx: &EngineContext,
    task: &Task,
    history: &[String],
    set: &CandidateSet,
) -> Decision {
    let suffix = format!("step={};stage3-decide-plain", set.step_index);
    select(ctx, task, history, set, None, ReviewUnit::Step, &suffix)
}

/// Scalar 0-10 self-scores for every candidate; duplicates share their
/// representative's score. Failures score zero, flagged.
pub fn score_candidates(
    ctx: &EngineContext,
    task: &Task,
    history: &[String],
    set: &CandidateSet,
) -> Vec<SelfEvalScore> {
    let reps = set.representatives();
    let step_index = set.step_index;
    let rep_scores = parallel_map(reps.len(), ctx.config.concurrency_limit, |j| {
        let i = reps[j];
        let request = ChatRequest {
            messages: build_score_messages(task, history, &set.candidates[i].text, ctx.pack),
            temperature: 0.0,
            max_tokens: ctx.config.max_tokens_decision,
            stop: vec![],
            tag: ctx.tag(&format!("step={step_index};score-c{i}")),
        };
        match ctx.providers.policy.complete(&request) {
            Ok(response) => parse_score(&response.content, i),
            Err(e) => SelfEvalScore {
                candidate_index: i,
                score: 0.0,
                parse_ok: false,
                raw: format!("[provider error: {e}]"),
            },
        }
    });
    let mut by_rep: Vec<Option<SelfEvalScore>> = vec![None; set.k()];
    for score in rep_scores {
        let index = score.candidate_index;
        by_rep[index] = Some(score);
    }
    set.candidates
        .iter()
        .map(|c| {
            let rep = c.duplicate_of.unwrap_or(c.index);
            let mut score = by_rep[rep].clone().expect("representative scored");
            score.candidate_index = c.index;
            score
        })
        .collect()
}

enum StepChoice {
    CritiquePanel,
    SelfEvalArgmax,
}

fn run_step_search(ctx: &EngineContext, task: &Task, choice: StepChoice) -> SearchTrace {
    let mut history: Vec<String> = Vec::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut terminated: Option<TerminationReason> = None;

    for step_index in 1..=ctx.config.max_steps {
        let set = match sample_candidates(ctx, task, &history, step_index) {
            Ok(set) => set,
            Err(_) => {
                terminated = Some(TerminationReason::ProviderError);
                break;
            }
        };

        let (critiques, chosen_index, counterfactual_index, rationale) = match choice {
            StepChoice::CritiquePanel => {
                let critiques = critique_candidates(ctx, task, &history, &set);
                let decision = select_with_critiques(ctx, task, &history, &set, &critiques);
                let counterfactual = ctx
                    .config
                    .compute_counterfactual
                    .then(|| select_without_critiques(ctx, task, &history, &set).chosen_index);
                (critiques, decision.chosen_index, counterfactual, decision.rationale)
            }
            StepChoice::SelfEvalArgmax => {
                let scores = score_candidates(ctx, task, &history, &set);
                let chosen = select_argmax(&scores).unwrap_or(0);
                let rendered: Vec<String> = scores.iter().map(|s| format!("{:.1}", s.score)).collect();
                (Vec::new(), chosen, None, format!("self-eval scores: [{}]", rendered.join(", ")))
            }
        };

        let chosen_text = set.candidates[chosen_index].text.clone();
        steps.push(StepRecord {
            candidate_set: set,
            critiques,
            chosen_index,
            counterfactual_index,
            decision_rationale: rationale,
        });
        history.push(chosen_text.clone());
        if is_terminal(&chosen_text) {
            terminated = Some(TerminationReason::FinalAnswer);
            break;
        }
    }

    let final_text: String = history.concat();
    SearchTrace {
        schema_version: SearchTrace::SCHEMA_VERSION,
        task_id: task.id.clone(),
        grade: grade(&final_text, task),
        steps,
        final_text,
        terminated_by: terminated.unwrap_or(TerminationReason::MaxSteps),
        config_snapshot: ctx.snapshot(),
    }
}

/// Full search: sample, critique, select, repeat.
pub fn run_panel(ctx: &EngineContext, task: &Task) -> SearchTrace {
    run_step_search(ctx, task, StepChoice::CritiquePanel)
}

/// Step-level baseline that replaces critique and selection with a scalar
/// self-score argmax over the same candidates.
pub fn run_step_self_eval(ctx: &EngineContext, task: &Task) -> SearchTrace {
    run_step_search(ctx, task, StepChoice::SelfEvalArgmax)
}

/// Single greedy decode of a complete solution, recorded as a one-step trace.
pub fn run_greedy_baseline(ctx: &EngineContext, task: &Task) -> SearchTrace {
    let request = ChatRequest {
        messages: build_solution_messages(task, ctx.pack),
        temperature: 0.0,
        max_tokens: ctx.max_tokens_solution,
        stop: vec![],
        tag: ctx.tag("greedy-baseline"),
    };
    match ctx.providers.policy.complete(&request) {
        Ok(response) => {
            let terminated_by = if is_terminal(&response.content) {
                TerminationReason::FinalAnswer
            } else {
                TerminationReason::MaxSteps
            };
            let set = CandidateSet::new(1, vec![(response.content.clone(), Origin::Greedy)]);
            SearchTrace {
                schema_version: SearchTrace::SCHEMA_VERSION,
                task_id: task.id.clone(),
                steps: vec![StepRecord {
                    candidate_set: set,
                    critiques: Vec::new(),
                    chosen_index: 0,
                    counterfactual_index: None,
                    decision_rationale: "greedy decode".to_string(),
                }],
                grade: grade(&response.content, task),
                final_text: response.content,
                terminated_by,
                config_snapshot: ctx.snapshot(),
            }
        }
        Err(_) => SearchTrace {
            schema_version: SearchTrace::SCHEMA_VERSION,
            task_id: task.id.clone(),
            steps: Vec::new(),
            final_text: String::new(),
            grade: grade("", task),
            terminated_by: TerminationReason::ProviderError,
            config_snapshot: ctx.snapshot(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{OracleProvider, ScriptedProvider};
    use panel_core::answer::AnswerSpec;
    use panel_core::task::Domain;

    fn task() -> Task {
        Task::new(
            "t1",
            "Track the value.\nStart with 10, add 5, multiply by 2, subtract 3.\nORACLE start=10 ops=add_5|mul_2|sub_3 twist=2 slot=3",
            Domain::Math,
            AnswerSpec::integer(),
            "27",
            "unit",
        )
        .unwrap()
    }

    fn oracle_providers() -> Providers {
        Providers { policy: Arc::new(OracleProvider::new()), critic: Arc::new(OracleProvider::new()) }
    }

    fn scripted_providers(p: ScriptedProvider) -> Providers {
        let shared: Arc<dyn ChatProvider> = Arc::new(p);
        Providers { policy: shared.clone(), critic: shared }
    }

    #[test]
    fn stage_one_yields_k_candidates_with_one_greedy() {
        let cfg = SearchConfig::default();
        let pack = PromptPack::default();
        let providers = oracle_providers();
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let set = sample_candidates(&ctx, &task(), &[], 1).unwrap();
        assert_eq!(set.k(), 5);
        let greedy_count = set.candidates.iter().filter(|c| c.origin == Origin::Greedy).count();
        assert_eq!(greedy_count, 1);
        assert_eq!(set.candidates[0].origin, Origin::Greedy);
        assert!(set.candidates[1..].iter().all(|c| c.origin == Origin::Sampled));
    }

    #[test]
    fn stage_one_request_temperatures_split_greedy_from_sampled() {
        let cfg = SearchConfig { concurrency_limit: 1, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let scripted = Arc::new(ScriptedProvider::new());
        for _ in 0..5 {
            scripted.push("a step");
        }
        let as_trait: Arc<dyn ChatProvider> = scripted.clone();
        let providers = Providers { policy: as_trait.clone(), critic: as_trait };
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        sample_candidates(&ctx, &task(), &[], 1).unwrap();
        let log = scripted.requests();
        assert_eq!(log.len(), 5);
        assert_eq!(log[0].temperature, 0.0);
        assert_eq!(log[0].tag, "task=t1;step=1;stage1-greedy");
        for (i, request) in log[1..].iter().enumerate() {
            assert_eq!(request.temperature, cfg.temperature);
            assert_eq!(request.tag, format!("task=t1;step=1;stage1-sample-{}", i + 1));
            assert_eq!(request.messages, log[0].messages);
        }
    }

    #[test]
    fn failed_sample_degrades_to_greedy_duplicate() {
        let cfg = SearchConfig { k: 3, concurrency_limit: 1, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let scripted = ScriptedProvider::new();
        scripted.push_tagged("stage1-greedy", "the greedy step");
        scripted.push_tagged("stage1-sample-1", "a sampled step");
        let providers = scripted_providers(scripted);
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let set = sample_candidates(&ctx, &task(), &[], 1).unwrap();
        assert_eq!(set.candidates[1].text, "a sampled step");
        assert_eq!(set.candidates[2].text, "the greedy step");
        assert_eq!(set.candidates[2].duplicate_of, Some(0));
        assert_eq!(set.candidates[2].origin, Origin::Sampled);
    }

    #[test]
    fn greedy_failure_aborts_the_step() {
        let cfg = SearchConfig::default();
        let pack = PromptPack::default();
        let providers = scripted_providers(ScriptedProvider::new());
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        assert!(sample_candidates(&ctx, &task(), &[], 1).is_err());
        let trace = run_panel(&ctx, &task());
        assert_eq!(trace.terminated_by, TerminationReason::ProviderError);
        assert!(trace.steps.is_empty());
        assert!(!trace.grade.correct);
    }

    #[test]
    fn duplicates_share_their_representatives_critique() {
        let cfg = SearchConfig { k: 5, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let providers = oracle_providers();
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let t = task();
        let set = sample_candidates(&ctx, &t, &[], 1).unwrap();
        assert!(set.representatives().len() < set.k(), "oracle plants duplicate candidates");
        let critiques = critique_candidates(&ctx, &t, &[], &set);
        assert_eq!(critiques.len(), 5);
        for (i, c) in critiques.iter().enumerate() {
            assert_eq!(c.candidate_index, i);
        }
        for c in &set.candidates {
            if let Some(rep) = c.duplicate_of {
                assert_eq!(critiques[c.index].text, critiques[rep].text);
                assert_eq!(critiques[c.index].correctness, critiques[rep].correctness);
            }
        }
    }

    #[test]
    fn critique_retries_stop_at_first_parseable_verdict() {
        let cfg = SearchConfig { k: 1, critique_retries: 2, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let scripted = ScriptedProvider::new();
        scripted.push_tagged("stage2-critique-c0-a0", "no json here");
        scripted.push_tagged("stage2-critique-c0-a1", "still prose");
        scripted.push_tagged(
            "stage2-critique-c0-a2",
            r#"{"correctness": "incorrect", "critique": "sign error"}"#,
        );
        let providers = scripted_providers(scripted);
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let set = CandidateSet::new(1, vec![("x".to_string(), Origin::Greedy)]);
        let critiques = critique_candidates(&ctx, &task(), &[], &set);
        assert_eq!(critiques[0].correctness, Correctness::Incorrect);
        assert_eq!(critiques[0].text, "sign error");
    }

    #[test]
    fn exhausted_critique_retries_record_unparseable() {
        let cfg = SearchConfig { k: 1, critique_retries: 1, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let scripted = ScriptedProvider::new();
        scripted.push("not a verdict");
        scripted.push("also not a verdict");
        let providers = scripted_providers(scripted);
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let set = CandidateSet::new(1, vec![("x".to_string(), Origin::Greedy)]);
        let critiques = critique_candidates(&ctx, &task(), &[], &set);
        assert_eq!(critiques[0].correctness, Correctness::Unparseable);
        assert_eq!(critiques[0].raw, "also not a verdict");
    }

    #[test]
    fn panel_follows_the_planted_path() {
        let cfg = SearchConfig::default();
        let pack = PromptPack::default();
        let providers = oracle_providers();
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let trace = run_panel(&ctx, &task());
        assert_eq!(trace.terminated_by, TerminationReason::FinalAnswer);
        assert_eq!(trace.steps.len(), 3);
        assert_eq!(trace.steps[0].chosen_index, 0);
        assert_eq!(trace.steps[1].chosen_index, 3, "twist step must pick the planted slot");
        assert_eq!(trace.steps[2].chosen_index, 0);
        assert!(trace.grade.correct);
        assert_eq!(trace.grade.extracted.as_deref(), Some("27"));
        assert_eq!(trace.final_text, trace.reconstruct_final_text());
    }

    #[test]
    fn step_self_eval_falls_for_misleading_scores() {
        let cfg = SearchConfig::default();
        let pack = PromptPack::default();
        let providers = oracle_providers();
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let trace = run_step_self_eval(&ctx, &task());
        assert_eq!(trace.terminated_by, TerminationReason::FinalAnswer);
        assert!(!trace.grade.correct);
        assert!(trace.steps.iter().all(|s| s.critiques.is_empty()));
        assert!(trace.steps.last().unwrap().chosen_index != 0);
    }

    #[test]
    fn terminal_candidate_selected_at_step_one_ends_the_search() {
        let cfg = SearchConfig { k: 2, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let scripted = ScriptedProvider::new();
        scripted.push_tagged("stage1-greedy", "The sum is 4.\nFINAL ANSWER: 4\n");
        scripted.push_tagged("stage1-sample-1", "Let me think more.\n");
        scripted.push_tagged(
            "stage2-critique",
            r#"{"correctness": "correct", "critique": ""}"#,
        );
        scripted.push_tagged(
            "stage2-critique",
            r#"{"correctness": "incorrect", "critique": "stalls"}"#,
        );
        scripted.push_tagged("stage3-decide-crit", "SELECTED: 0");
        let providers = scripted_providers(scripted);
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let t = Task::new("t1", "2+2?", Domain::Math, AnswerSpec::integer(), "4", "unit").unwrap();
        let trace = run_panel(&ctx, &t);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.terminated_by, TerminationReason::FinalAnswer);
        assert!(trace.grade.correct);
    }

    #[test]
    fn step_budget_exhaustion_terminates_with_max_steps() {
        let cfg = SearchConfig { k: 2, max_steps: 2, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let scripted = ScriptedProvider::new();
        for _ in 0..2 {
            scripted.push_tagged("stage1-greedy", "keep going\n");
            scripted.push_tagged("stage1-sample-1", "still going\n");
            scripted.push_tagged("stage2-critique", r#"{"correctness": "correct", "critique": ""}"#);
            scripted.push_tagged("stage2-critique", r#"{"correctness": "correct", "critique": ""}"#);
        }
        scripted.push_tagged("stage3-decide-crit", "SELECTED: 0");
        scripted.push_tagged("stage3-decide-crit", "SELECTED: 1");
        let providers = scripted_providers(scripted);
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let t = Task::new("t1", "2+2?", Domain::Math, AnswerSpec::integer(), "4", "unit").unwrap();
        let trace = run_panel(&ctx, &t);
        assert_eq!(trace.steps.len(), 2);
        assert_eq!(trace.terminated_by, TerminationReason::MaxSteps);
        assert_eq!(trace.grade.failure_reason.map(|r| format!("{r:?}")), Some("NoAnswerFound".to_string()));
        assert_eq!(trace.final_text, "keep going\nstill going\n");
    }

    #[test]
    fn counterfactual_probe_does_not_steer_the_search() {
        let pack = PromptPack::default();
        let providers = oracle_providers();
        let with_cfg = SearchConfig { compute_counterfactual: true, ..SearchConfig::default() };
        let without_cfg = SearchConfig::default();
        let t = task();
        let with_ctx = EngineContext::new(&with_cfg, &pack, &providers, "t1");
        let without_ctx = EngineContext::new(&without_cfg, &pack, &providers, "t1");
        let with = run_panel(&with_ctx, &t);
        let without = run_panel(&without_ctx, &t);

        assert_eq!(with.final_text, without.final_text);
        assert_eq!(with.grade, without.grade);
        assert_eq!(with.steps.len(), without.steps.len());
        for (a, b) in with.steps.iter().zip(&without.steps) {
            assert_eq!(a.chosen_index, b.chosen_index);
            assert_eq!(a.candidate_set, b.candidate_set);
            assert!(b.counterfactual_index.is_none());
        }
        assert_eq!(with.steps[1].counterfactual_index, Some(0));
        assert_eq!(with.steps[0].counterfactual_index, Some(0));
    }

    #[test]
    fn greedy_baseline_grades_its_single_decode() {
        let cfg = SearchConfig::default();
        let pack = PromptPack::default();
        let scripted = ScriptedProvider::new();
        scripted.push("Two plus two is four.\nFINAL ANSWER: 42");
        let providers = scripted_providers(scripted);
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let t = Task::new("t1", "6*7?", Domain::Math, AnswerSpec::integer(), "42", "unit").unwrap();
        let trace = run_greedy_baseline(&ctx, &t);
        assert!(trace.grade.correct);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.terminated_by, TerminationReason::FinalAnswer);
    }

    #[test]
    fn greedy_baseline_without_sentinel_is_no_answer() {
        let cfg = SearchConfig::default();
        let pack = PromptPack::default();
        let scripted = ScriptedProvider::new();
        scripted.push("I ran out of space before concluding");
        let providers = scripted_providers(scripted);
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let t = Task::new("t1", "6*7?", Domain::Math, AnswerSpec::integer(), "42", "unit").unwrap();
        let trace = run_greedy_baseline(&ctx, &t);
        assert!(!trace.grade.correct);
        assert_eq!(trace.terminated_by, TerminationReason::MaxSteps);
        assert!(trace.grade.extracted.is_none());
    }

    #[test]
    fn searches_are_deterministic_given_a_deterministic_provider() {
        let cfg = SearchConfig { compute_counterfactual: true, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let providers = oracle_providers();
        let ctx = EngineContext::new(&cfg, &pack, &providers, "t1");
        let a = run_panel(&ctx, &task());
        let b = run_panel(&ctx, &task());
        assert_eq!(a, b);
    }

    struct JunkProvider;

    impl ChatProvider for JunkProvider {
        fn complete(&self, request: &ChatRequest) -> Result<panel_core::chat::ChatResponse, ProviderError> {
            let digest = request.digest();
            let table = [
                "",
                "SELECTED: 99",
                "{\"correctness\": \"maybe\"}",
                "step text\nFINAL ANSWER: not-a-number",
                "{{{{",
                "SELECTED:",
                "7",
                "some step\n",
                "FINAL ANSWER: 12",
                "{\"correctness\": \"incorrect\", \"critique\": \"x\"} SELECTED: 1",
            ];
            let pick = digest.bytes().map(u64::from).sum::<u64>() as usize % table.len();
            Ok(panel_core::chat::ChatResponse {
                content: table[pick].to_string(),
                finish_reason: panel_core::chat::FinishReason::Stop,
                usage: None,
                provider_id: "junk".to_string(),
            })
        }

        fn descriptor(&self) -> String {
            "junk".to_string()
        }
    }

    #[test]
    fn junk_replies_never_break_trace_structure() {
        let cfg = SearchConfig { max_steps: 6, compute_counterfactual: true, ..SearchConfig::default() };
        let pack = PromptPack::default();
        let providers = Providers { policy: Arc::new(JunkProvider), critic: Arc::new(JunkProvider) };
        for id in ["a", "b", "c", "d"] {
            let ctx = EngineContext::new(&cfg, &pack, &providers, id);
            let t = Task::new(id, format!("junk run {id}"), Domain::Other, AnswerSpec::integer(), "12", "unit").unwrap();
            for trace in [run_panel(&ctx, &t), run_step_self_eval(&ctx, &t)] {
                assert!(trace.steps.len() <= cfg.max_steps);
                for step in &trace.steps {
                    assert_eq!(step.candidate_set.k(), cfg.k);
                    assert!(step.chosen_index < cfg.k);
                    if let Some(cf) = step.counterfactual_index {
                        assert!(cf < cfg.k);
                    }
                }
                assert_eq!(trace.final_text, trace.reconstruct_final_text());
                serde_json::to_string(&trace).expect("traces always serialize");
            }
        }
    }
}
