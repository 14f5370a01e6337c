//! Deterministic oracle provider for offline separation tests.
//!
//! Tasks carry a control line of the form
//! `ORACLE start=<v> ops=add_3|mul_2|sub_4 twist=<t> slot=<s>` describing a
//! chain of arithmetic steps. The oracle answers every request as a pure
//! function of that line and the request tag:
//!
//! - step sampling plants exactly one correct candidate per step: the greedy
//!   candidate everywhere except step `twist`, where only sampled candidate
//!   `slot` is correct (so following greedy, or ignoring critiques, fails);
//! - step critiques are truthful about which candidate is correct;
//! - the critique-aware selector picks the correct candidate, the plain
//!   selector always picks candidate 0;
//! - scalar self-scores are misleading: wrong candidates score high;
//! - full-solution sampling yields one correct solution (sample 1) among
//!   wrong ones, with truthful solution critiques.

use panel_core::chat::{ChatRequest, ChatResponse, FinishReason, TokenUsage};
use serde_json::json;

use super::{ChatProvider, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    Add(i64),
    Mul(i64),
    Sub(i64),
}

impl Op {
    pub(crate) fn parse(token: &str) -> Option<Op> {
        let (name, arg) = token.split_once('_')?;
        let n: i64 = arg.parse().ok()?;
        match name {
            "add" => Some(Op::Add(n)),
            "mul" => Some(Op::Mul(n)),
            "sub" => Some(Op::Sub(n)),
            _ => None,
        }
    }

    pub(crate) fn apply(&self, v: i64) -> i64 {
        match self {
            Op::Add(n) => v + n,
            Op::Mul(n) => v * n,
            Op::Sub(n) => v - n,
        }
    }

    pub(crate) fn display(&self) -> String {
        match self {
            Op::Add(n) => format!("add {n}"),
            Op::Mul(n) => format!("multiply by {n}"),
            Op::Sub(n) => format!("subtract {n}"),
        }
    }

    pub(crate) fn token(&self) -> String {
        match self {
            Op::Add(n) => format!("add_{n}"),
            Op::Mul(n) => format!("mul_{n}"),
            Op::Sub(n) => format!("sub_{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct OracleSpec {
    start: i64,
    ops: Vec<Op>,
    /// 1-based step at which the greedy candidate is wrong.
    twist: usize,
    /// Sampled candidate index holding the correct step at the twist.
    slot: usize,
}

impl OracleSpec {
    fn parse(text: &str) -> Option<OracleSpec> {
        let line = text.lines().rev().find(|l| l.trim_start().starts_with("ORACLE "))?;
        let mut start = None;
        let mut ops = None;
        let mut twist = None;
        let mut slot = None;
        for field in line.trim_start().trim_start_matches("ORACLE ").split_whitespace() {
            let (key, value) = field.split_once('=')?;
            match key {
                "start" => start = value.parse::<i64>().ok(),
                "ops" => {
                    ops = value.split('|').map(Op::parse).collect::<Option<Vec<_>>>();
                }
                "twist" => twist = value.parse::<usize>().ok(),
                "slot" => slot = value.parse::<usize>().ok(),
                _ => return None,
            }
        }
        let spec = OracleSpec { start: start?, ops: ops?, twist: twist?, slot: slot? };
        if spec.ops.is_empty() || spec.twist == 0 || spec.twist > spec.ops.len() || spec.slot == 0 {
            return None;
        }
        Some(spec)
    }

    fn steps(&self) -> usize {
        self.ops.len()
    }

    /// Correct running values, `values()[t]` being the value after step t.
    fn values(&self) -> Vec<i64> {
        let mut out = vec![self.start];
        for op in &self.ops {
            out.push(op.apply(*out.last().unwrap()));
        }
        out
    }

    /// Index of the one correct candidate at step `t`.
    fn correct_slot(&self, t: usize) -> usize {
        if t == self.twist {
            self.slot
        } else {
            0
        }
    }

    /// Error a wrong candidate adds to the step value; never zero, and shared
    /// by candidate indices congruent mod 3 so duplicate handling gets
    /// exercised on real runs.
    fn delta(&self, candidate: usize, t: usize) -> i64 {
        ((candidate + t) % 3 + 1) as i64
    }

    fn step_line(&self, t: usize, prev: i64, value: i64) -> String {
        let mut line =
            format!("Step {t}: applying '{}' to {prev} gives {value}.\n", self.ops[t - 1].display());
        if t == self.steps() {
            line.push_str(&format!("FINAL ANSWER: {value}\n"));
        }
        line
    }

    fn correct_step_text(&self, t: usize) -> String {
        let values = self.values();
        self.step_line(t, values[t - 1], values[t])
    }

    fn wrong_step_text(&self, t: usize, candidate: usize) -> String {
        let values = self.values();
        self.step_line(t, values[t - 1], values[t] + self.delta(candidate, t))
    }

    fn step_candidate_text(&self, t: usize, candidate: usize) -> String {
        if candidate == self.correct_slot(t) {
            self.correct_step_text(t)
        } else {
            self.wrong_step_text(t, candidate)
        }
    }

    fn correct_solution_text(&self) -> String {
        let values = self.values();
        (1..=self.steps()).map(|t| self.step_line(t, values[t - 1], values[t])).collect()
    }

    /// The solution a greedy decoder would produce: wrong at the twist step,
    /// with the error propagated through the remaining operations.
    fn wrong_solution_text(&self) -> String {
        let mut out = String::new();
        let mut prev = self.start;
        for t in 1..=self.steps() {
            let mut value = self.ops[t - 1].apply(prev);
            if t == self.twist {
                value += self.delta(0, t);
            }
            out.push_str(&self.step_line(t, prev, value));
            prev = value;
        }
        out
    }

    #[cfg(test)]
    fn wrong_final_value(&self) -> i64 {
        let values = self.values();
        let mut w = values[self.twist] + self.delta(0, self.twist);
        for op in &self.ops[self.twist..] {
            w = op.apply(w);
        }
        w
    }

    fn critique_json(&self, verdict_correct: bool, detail: String) -> String {
        if verdict_correct {
            json!({"correctness": "correct", "critique": ""}).to_string()
        } else {
            json!({"correctness": "incorrect", "critique": detail}).to_string()
        }
    }

    fn step_critique(&self, t: usize, candidate: usize) -> String {
        let correct = candidate == self.correct_slot(t);
        let values = self.values();
        let detail = if correct {
            String::new()
        } else {
            format!(
                "applying '{}' to {} gives {}, not {}",
                self.ops[t - 1].display(),
                values[t - 1],
                values[t],
                values[t] + self.delta(candidate, t),
            )
        };
        self.critique_json(correct, detail)
    }

    fn solution_critique(&self, sample: usize) -> String {
        let correct = sample == 1;
        let detail = if correct {
            String::new()
        } else {
            let values = self.values();
            format!(
                "step {} applies '{}' to {} and should give {}, not {}",
                self.twist,
                self.ops[self.twist - 1].display(),
                values[self.twist - 1],
                values[self.twist],
                values[self.twist] + self.delta(0, self.twist),
            )
        };
        self.critique_json(correct, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Purpose {
    StepGreedy,
    StepSample(usize),
    StepCritique(usize),
    DecideWithCritiques,
    DecidePlain,
    Score(usize),
    SolutionSample(usize),
    SolutionCritique(usize),
    SolutionSelectWithCritiques,
    SolutionSelectPlain,
    GreedyBaseline,
}

fn strip_attempt(s: &str) -> &str {
    if let Some((head, tail)) = s.rsplit_once("-a") {
        if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) {
            return head;
        }
    }
    s
}

fn trailing_index(s: &str, prefix: &str) -> Option<usize> {
    s.strip_prefix(prefix)?.parse().ok()
}

fn parse_purpose(segment: &str) -> Option<Purpose> {
    let segment = strip_attempt(segment);
    match segment {
        "stage1-greedy" => return Some(Purpose::StepGreedy),
        "stage3-decide-crit" => return Some(Purpose::DecideWithCritiques),
        "stage3-decide-plain" => return Some(Purpose::DecidePlain),
        "solution-select-crit" => return Some(Purpose::SolutionSelectWithCritiques),
        "solution-select-plain" => return Some(Purpose::SolutionSelectPlain),
        "greedy-baseline" => return Some(Purpose::GreedyBaseline),
        _ => {}
    }
    if let Some(i) = trailing_index(segment, "stage1-sample-") {
        return Some(Purpose::StepSample(i));
    }
    if let Some(i) = trailing_index(segment, "stage2-critique-c") {
        return Some(Purpose::StepCritique(i));
    }
    if let Some(i) = trailing_index(segment, "score-c") {
        return Some(Purpose::Score(i));
    }
    if let Some(i) = trailing_index(segment, "solution-sample-") {
        return Some(Purpose::SolutionSample(i));
    }
    if let Some(i) = trailing_index(segment, "solution-critique-") {
        return Some(Purpose::SolutionCritique(i));
    }
    None
}

fn tag_step(tag: &str) -> Option<usize> {
    tag.split(';').find_map(|seg| seg.strip_prefix("step=")).and_then(|s| s.parse().ok())
}

/// See the module docs; all state lives in the request.
pub struct OracleProvider;

impl OracleProvider {
    pub fn new() -> OracleProvider {
        OracleProvider
    }
}

impl Default for OracleProvider {
    fn default() -> OracleProvider {
        OracleProvider::new()
    }
}

impl ChatProvider for OracleProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate().map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
        let spec = request
            .messages
            .iter()
            .rev()
            .find_map(|m| OracleSpec::parse(&m.content))
            .ok_or_else(|| {
                ProviderError::InvalidRequest(
                    "oracle provider requires an ORACLE control line in the prompt".to_string(),
                )
            })?;
        let purpose = request
            .tag
            .split(';')
            .next_back()
            .and_then(parse_purpose)
            .ok_or_else(|| {
                ProviderError::InvalidRequest(format!(
                    "oracle provider cannot interpret tag {:?}",
                    request.tag
                ))
            })?;
        let step = || {
            tag_step(&request.tag).filter(|t| (1..=spec.steps()).contains(t)).ok_or_else(|| {
                ProviderError::InvalidRequest(format!(
                    "tag {:?} lacks a valid step for a step-scoped request",
                    request.tag
                ))
            })
        };

        let content = match purpose {
            Purpose::StepGreedy => spec.step_candidate_text(step()?, 0),
            Purpose::StepSample(i) => spec.step_candidate_text(step()?, i),
            Purpose::StepCritique(i) => spec.step_critique(step()?, i),
            Purpose::DecideWithCritiques => {
                let t = step()?;
                format!(
                    "SELECTED: {} - the assessments leave only this candidate unchallenged",
                    spec.correct_slot(t)
                )
            }
            Purpose::DecidePlain => "SELECTED: 0".to_string(),
            Purpose::Score(i) => {
                if i == spec.correct_slot(step()?) { "2".to_string() } else { "9".to_string() }
            }
            Purpose::SolutionSample(i) => {
                if i == 1 {
                    spec.correct_solution_text()
                } else {
                    spec.wrong_solution_text()
                }
            }
            Purpose::SolutionCritique(i) => spec.solution_critique(i),
            Purpose::SolutionSelectWithCritiques => "SELECTED: 1".to_string(),
            Purpose::SolutionSelectPlain => "SELECTED: 0".to_string(),
            Purpose::GreedyBaseline => spec.wrong_solution_text(),
        };

        let prompt_bytes: usize = request.messages.iter().map(|m| m.content.len()).sum();
        Ok(ChatResponse {
            usage: Some(TokenUsage {
                prompt_tokens: (prompt_bytes / 4) as u64,
                completion_tokens: (content.len() / 4) as u64,
            }),
            content,
            finish_reason: FinishReason::Stop,
            provider_id: "scripted-oracle".to_string(),
        })
    }

    fn descriptor(&self) -> String {
        "scripted-oracle".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use panel_core::chat::ChatMessage;

    const CONTROL: &str = "ORACLE start=10 ops=add_5|mul_2|sub_3 twist=2 slot=3";

    fn spec() -> OracleSpec {
        OracleSpec::parse(CONTROL).unwrap()
    }

    fn req(tag: &str) -> ChatRequest {
        ChatRequest {
            messages: vec![
                ChatMessage::system("solve"),
                ChatMessage::user(format!("Problem...\n{CONTROL}\n")),
            ],
            temperature: 0.0,
            max_tokens: 128,
            stop: vec![],
            tag: tag.to_string(),
        }
    }

    fn content(tag: &str) -> String {
        OracleProvider::new().complete(&req(tag)).unwrap().content
    }

    #[test]
    fn value_chain_follows_the_ops() {
        assert_eq!(spec().values(), vec![10, 15, 30, 27]);
        assert_eq!(spec().steps(), 3);
    }

    #[test]
    fn greedy_is_correct_off_twist_and_wrong_on_it() {
        let c1 = content("task=t;step=1;stage1-greedy");
        assert!(c1.contains("gives 15."), "{c1}");
        let c2 = content("task=t;step=2;stage1-greedy");
        assert!(!c2.contains("gives 30."), "{c2}");
        let c3 = content("task=t;step=3;stage1-greedy");
        assert!(c3.contains("gives 27."));
        assert!(c3.contains("FINAL ANSWER: 27"));
    }

    #[test]
    fn only_the_slot_sample_is_correct_at_the_twist() {
        for i in 1..5 {
            let c = content(&format!("task=t;step=2;stage1-sample-{i}"));
            assert_eq!(c.contains("gives 30."), i == 3, "sample {i}: {c}");
        }
    }

    #[test]
    fn retry_suffix_does_not_change_the_reply() {
        assert_eq!(
            content("task=t;step=1;stage1-sample-2"),
            content("task=t;step=1;stage1-sample-2-a1"),
        );
    }

    #[test]
    fn wrong_samples_collide_mod_three() {
        let c1 = content("task=t;step=1;stage1-sample-1");
        let c4 = content("task=t;step=1;stage1-sample-4");
        let c2 = content("task=t;step=1;stage1-sample-2");
        assert_eq!(c1, c4);
        assert_ne!(c1, c2);
    }

    #[test]
    fn critiques_are_truthful() {
        let good = content("task=t;step=2;stage2-critique-c3-a0");
        assert!(good.contains("\"correct\""));
        let bad = content("task=t;step=2;stage2-critique-c0-a0");
        assert!(bad.contains("\"incorrect\""));
        assert!(bad.contains("gives 30, not"));
    }

    #[test]
    fn deciders_split_on_critique_use() {
        assert!(content("task=t;step=2;stage3-decide-crit").starts_with("SELECTED: 3"));
        assert_eq!(content("task=t;step=2;stage3-decide-plain"), "SELECTED: 0");
        assert!(content("task=t;step=1;stage3-decide-crit").starts_with("SELECTED: 0"));
    }

    #[test]
    fn scores_mislead() {
        assert_eq!(content("task=t;step=2;score-c3"), "2");
        assert_eq!(content("task=t;step=2;score-c0"), "9");
        assert_eq!(content("task=t;step=1;score-c0"), "2");
        assert_eq!(content("task=t;step=1;score-c2"), "9");
    }

    #[test]
    fn wrong_solution_propagates_the_twist_error() {
        let text = spec().wrong_solution_text();
        assert!(text.contains("Step 1: applying 'add 5' to 10 gives 15."));
        assert!(text.contains("Step 2: applying 'multiply by 2' to 15 gives 33."));
        assert!(text.contains("Step 3: applying 'subtract 3' to 33 gives 30."));
        assert!(text.ends_with("FINAL ANSWER: 30\n"));
        assert_eq!(spec().wrong_final_value(), 30);
    }

    #[test]
    fn solution_samples_and_critiques_line_up() {
        let correct = content("task=t;solution-sample-1");
        assert!(correct.ends_with("FINAL ANSWER: 27\n"));
        let wrong = content("task=t;solution-sample-0");
        assert!(wrong.ends_with("FINAL ANSWER: 30\n"));
        assert_eq!(wrong, content("task=t;solution-sample-4"));
        assert!(content("task=t;solution-critique-1-a0").contains("\"correct\""));
        assert!(content("task=t;solution-critique-0-a0").contains("\"incorrect\""));
        assert!(content("task=t;solution-select-crit").starts_with("SELECTED: 1"));
        assert_eq!(content("task=t;solution-select-plain"), "SELECTED: 0");
        assert!(content("task=t;greedy-baseline").ends_with("FINAL ANSWER: 30\n"));
    }

    #[test]
    fn missing_control_line_is_rejected() {
        let mut r = req("task=t;step=1;stage1-greedy");
        r.messages[1].content = "no control line here".to_string();
        assert!(matches!(
            OracleProvider::new().complete(&r),
            Err(ProviderError::InvalidRequest(_))
        ));
    }

    #[test]
    fn unknown_purpose_is_rejected() {
        assert!(matches!(
            OracleProvider::new().complete(&req("task=t;step=1;stage9-mystery")),
            Err(ProviderError::InvalidRequest(_))
        ));
    }

    #[test]
    fn usage_is_deterministic() {
        let a = OracleProvider::new().complete(&req("task=t;step=1;stage1-greedy")).unwrap();
        let b = OracleProvider::new().complete(&req("task=t;step=1;stage1-greedy")).unwrap();
        assert_eq!(a.usage, b.usage);
        assert!(a.usage.unwrap().prompt_tokens > 0);
    }

    #[test]
    fn control_line_round_trips_through_op_tokens() {
        let s = spec();
        let tokens: Vec<String> = s.ops.iter().map(|op| op.token()).collect();
        assert_eq!(tokens.join("|"), "add_5|mul_2|sub_3");
    }
}
