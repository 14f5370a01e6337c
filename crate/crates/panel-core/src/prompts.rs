//! Prompt pack: the templates every method builds its messages from, with
//! embedded defaults that an on-disk pack directory can override.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::answer::AnswerKind;
use crate::chat::{sha256_hex, ChatMessage};
use crate::task::{Domain, Task};

/// Whether a critique call reviews one step or a whole solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReviewUnit {
    Step,
    Solution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPack {
    pub critique_system_math: String,
    pub critique_system_physics: String,
    pub critique_system_chemistry: String,
    pub critique_system_biology: String,
    pub critique_system_generic: String,
    pub critique_user: String,
    pub step_system: String,
    pub solution_system: String,
    pub decision_system: String,
    pub self_eval_system: String,
}

impl Default for PromptPack {
    fn default() -> PromptPack {
        PromptPack {
            critique_system_math: include_str!("../prompts/critique_system_math.txt").to_string(),
            critique_system_physics: include_str!("../prompts/critique_system_physics.txt").to_string(),
            critique_system_chemistry: include_str!("../prompts/critique_system_chemistry.txt").to_string(),
            critique_system_biology: include_str!("../prompts/critique_system_biology.txt").to_string(),
            critique_system_generic: include_str!("../prompts/critique_system_generic.txt").to_string(),
            critique_user: include_str!("../prompts/critique_user.txt").to_string(),
            step_system: include_str!("../prompts/step_system.txt").to_string(),
            solution_system: include_str!("../prompts/solution_system.txt").to_string(),
            decision_system: include_str!("../prompts/decision_system.txt").to_string(),
            self_eval_system: include_str!("../prompts/self_eval_system.txt").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("unknown prompt file stem {0:?}")]
    UnknownStem(String),
    #[error("template {template:?} is missing placeholder {placeholder:?}")]
    MissingPlaceholder { template: &'static str, placeholder: &'static str },
    #[error("template {0:?} is empty")]
    EmptyTemplate(&'static str),
}

impl PromptPack {
    /// File stems a prompt pack directory may provide, one `.txt` each.
    pub const FILE_STEMS: [&'static str; 10] = [
        "critique_system_math",
        "critique_system_physics",
        "critique_system_chemistry",
        "critique_system_biology",
        "critique_system_generic",
        "critique_user",
        "step_system",
        "solution_system",
        "decision_system",
        "self_eval_system",
    ];

    pub fn set_file(&mut self, stem: &str, content: String) -> Result<(), PromptError> {
        let slot = match stem {
            "critique_system_math" => &mut self.critique_system_math,
            "critique_system_physics" => &mut self.critique_system_physics,
            "critique_system_chemistry" => &mut self.critique_system_chemistry,
            "critique_system_biology" => &mut self.critique_system_biology,
            "critique_system_generic" => &mut self.critique_system_generic,
            "critique_user" => &mut self.critique_user,
            "step_system" => &mut self.step_system,
            "solution_system" => &mut self.solution_system,
            "decision_system" => &mut self.decision_system,
            "self_eval_system" => &mut self.self_eval_system,
            other => return Err(PromptError::UnknownStem(other.to_string())),
        };
        *slot = content;
        Ok(())
    }

    /// Template texts paired with their file stems, in `FILE_STEMS` order.
    pub fn files(&self) -> [(&'static str, &str); 10] {
        [
            ("critique_system_math", self.critique_system_math.as_str()),
            ("critique_system_physics", self.critique_system_physics.as_str()),
            ("critique_system_chemistry", self.critique_system_chemistry.as_str()),
            ("critique_system_biology", self.critique_system_biology.as_str()),
            ("critique_system_generic", self.critique_system_generic.as_str()),
            ("critique_user", self.critique_user.as_str()),
            ("step_system", self.step_system.as_str()),
            ("solution_system", self.solution_system.as_str()),
            ("decision_system", self.decision_system.as_str()),
            ("self_eval_system", self.self_eval_system.as_str()),
        ]
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        for (name, text) in self.files() {
            if text.trim().is_empty() {
                return Err(PromptError::EmptyTemplate(name));
            }
        }
        for placeholder in ["{problem}", "{prior_steps}", "{candidate}"] {
            if !self.critique_user.contains(placeholder) {
                return Err(PromptError::MissingPlaceholder {
                    template: "critique_user",
                    placeholder: match placeholder {
                        "{problem}" => "{problem}",
                        "{prior_steps}" => "{prior_steps}",
                        _ => "{candidate}",
                    },
                });
            }
        }
        Ok(())
    }

    pub fn critique_system(&self, domain: Domain) -> &str {
        match domain {
            Domain::Math => &self.critique_system_math,
            Domain::Physics => &self.critique_system_physics,
            Domain::Chemistry => &self.critique_system_chemistry,
            Domain::Biology => &self.critique_system_biology,
            Domain::Other => &self.critique_system_generic,
        }
    }

    /// Content digest over every template, for run provenance.
    pub fn digest(&self) -> String {
        let mut joined = String::new();
        for (stem, field) in self.files() {
            joined.push_str(stem);
            joined.push('\0');
            joined.push_str(field);
            joined.push('\0');
        }
        sha256_hex(joined.as_bytes())
    }
}

/// Instruction telling the model what shape of final answer the task expects.
pub fn answer_format_line(task: &Task) -> String {
    match task.answer_spec.kind {
        AnswerKind::Integer0To999 => {
            "The final answer is an integer between 0 and 999.".to_string()
        }
        AnswerKind::MultipleChoice => {
            let choices = task.answer_spec.choices.as_deref().unwrap_or(&[]).join(", ");
            format!("The final answer is one of the choices: {choices}.")
        }
    }
}

/// Numbered rendering of the steps chosen so far; "(none)" before step one.
pub fn render_prior_steps(history: &[String]) -> String {
    if history.is_empty() {
        return "(none)".to_string();
    }
    let mut out = String::new();
    for (i, step) in history.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("{}. {}", i + 1, step.trim_end()));
    }
    out
}

/// Messages asking the policy model for the next reasoning step.
pub fn build_step_messages(task: &Task, history: &[String], pack: &PromptPack) -> Vec<ChatMessage> {
    let user = format!(
        "Problem:\n{}\n\n{}\n\nSteps so far:\n{}\n\nWrite step {}.",
        task.prompt,
        answer_format_line(task),
        render_prior_steps(history),
        history.len() + 1,
    );
    [ChatMessage::system(&pack.step_system), ChatMessage::user(user)].into_iter().collect()
}

/// Messages asking the policy model for a complete solution in one reply.
pub fn build_solution_messages(task: &Task, pack: &PromptPack) -> Vec<ChatMessage> {
    let user = format!("Problem:\n{}\n\n{}", task.prompt, answer_format_line(task));
    [ChatMessage::system(&pack.solution_system), ChatMessage::user(user)].into_iter().collect()
}

fn adapt_for_solution(step_template: &str) -> String {
    step_template
        .replace("the latest reasoning step", "the complete solution")
        .replace("the current reasoning step", "the complete solution")
        .replace("the current step", "the complete solution")
}

/// Messages asking the critic to assess one candidate, either the latest step
/// or a complete solution. The domain picks the system template.
pub fn build_critique_messages(
    task: &Task,
    history: &[String],
    candidate: &str,
    unit: ReviewUnit,
    pack: &PromptPack,
) -> Vec<ChatMessage> {
    let system = match unit {
        ReviewUnit::Step => pack.critique_system(task.domain).to_string(),
        ReviewUnit::Solution => adapt_for_solution(pack.critique_system(task.domain)),
    };
    let unit_label = match unit {
        ReviewUnit::Step => "Latest reasoning step",
        ReviewUnit::Solution => "Complete solution",
    };
    let user = pack
        .critique_user
        .replace("{problem}", &task.prompt)
        .replace("{prior_steps}", &render_prior_steps(history))
        .replace("{unit_label}", unit_label)
        .replace("{candidate}", candidate);
    [ChatMessage::system(system), ChatMessage::user(user)].into_iter().collect()
}

/// Messages asking the policy model to pick among candidates. Passing
/// `annotations` adds one assessment line per candidate; everything else in
/// the prompt is byte-identical with and without them.
pub fn build_selection_messages(
    task: &Task,
    history: &[String],
    candidates: &[&str],
    annotations: Option<&[&str]>,
    unit: ReviewUnit,
    pack: &PromptPack,
) -> Vec<ChatMessage> {
    let noun = match unit {
        ReviewUnit::Step => "Candidate next steps",
        ReviewUnit::Solution => "Candidate solutions",
    };
    let mut user = format!(
        "Problem:\n{}\n\nSteps so far:\n{}\n\n{}:\n",
        task.prompt,
        render_prior_steps(history),
        noun,
    );
    for (i, text) in candidates.iter().enumerate() {
        user.push_str(&format!("[{i}]\n{}\n\n", text.trim_end()));
    }
    if let Some(notes) = annotations {
        user.push_str("Assessments:\n");
        for (i, note) in notes.iter().enumerate() {
            user.push_str(&format!("[{i}] {note}\n"));
        }
        user.push('\n');
    }
    user.push_str("Reply with \"SELECTED: <index>\".");
    [ChatMessage::system(&pack.decision_system), ChatMessage::user(user)].into_iter().collect()
}

/// Messages asking the policy model to score one candidate from 0 to 10.
pub fn build_score_messages(
    task: &Task,
    history: &[String],
    candidate: &str,
    pack: &PromptPack,
) -> Vec<ChatMessage> {
    let user = format!(
        "Problem:\n{}\n\nSteps so far:\n{}\n\nCandidate next step:\n{}\n\nRate this candidate from 0 to 10.",
        task.prompt,
        render_prior_steps(history),
        candidate.trim_end(),
    );
    [ChatMessage::system(&pack.self_eval_system), ChatMessage::user(user)].into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::AnswerSpec;
    use alloc::vec;

    fn task(domain: Domain) -> Task {
        Task::new("t1", "How many moles?", domain, AnswerSpec::integer(), "7", "unit").unwrap()
    }

    #[test]
    fn domain_selects_the_system_template() {
        let pack = PromptPack::default();
        let physics = build_critique_messages(&task(Domain::Physics), &[], "step", ReviewUnit::Step, &pack);
        assert!(physics[0].content.starts_with("You are an expert physicist"));
        let math = build_critique_messages(&task(Domain::Math), &[], "step", ReviewUnit::Step, &pack);
        assert!(math[0].content.starts_with("You are an expert mathematician"));
        let bio = build_critique_messages(&task(Domain::Biology), &[], "step", ReviewUnit::Step, &pack);
        assert!(bio[0].content.starts_with("You are an expert biologist"));
        let chem = build_critique_messages(&task(Domain::Chemistry), &[], "step", ReviewUnit::Step, &pack);
        assert!(chem[0].content.starts_with("You are an expert chemist"));
        let other = build_critique_messages(&task(Domain::Other), &[], "step", ReviewUnit::Step, &pack);
        assert!(other[0].content.starts_with("You are an expert analyst"));
    }

    #[test]
    fn every_critique_template_states_the_output_contract() {
        let pack = PromptPack::default();
        for domain in Domain::ALL {
            let system = pack.critique_system(domain);
            assert!(system.contains("\"correctness\": \"correct\""), "{domain} lacks contract");
            assert!(system.contains("\"critique\""), "{domain} lacks critique field");
        }
    }

    #[test]
    fn empty_history_renders_as_none() {
        let pack = PromptPack::default();
        let msgs = build_critique_messages(&task(Domain::Math), &[], "x + 1 = 2", ReviewUnit::Step, &pack);
        assert!(msgs[1].content.contains("Prior steps:\n(none)"));
        assert!(msgs[1].content.contains("x + 1 = 2"));
        assert!(msgs[1].content.contains("How many moles?"));
    }

    #[test]
    fn history_is_numbered_in_order() {
        let history = vec!["first".to_string(), "second".to_string()];
        assert_eq!(render_prior_steps(&history), "1. first\n2. second");
    }

    #[test]
    fn solution_unit_reframes_the_critique() {
        let pack = PromptPack::default();
        let msgs = build_critique_messages(&task(Domain::Math), &[], "whole solution", ReviewUnit::Solution, &pack);
        assert!(msgs[0].content.contains("the complete solution"));
        assert!(!msgs[0].content.contains("the latest reasoning step"));
        assert!(msgs[1].content.contains("Complete solution:\nwhole solution"));
    }

    #[test]
    fn selection_messages_differ_only_by_assessments() {
        let pack = PromptPack::default();
        let t = task(Domain::Math);
        let candidates = ["step one", "step two"];
        let notes = ["no issues found", "drops a factor of 2"];
        let plain = build_selection_messages(&t, &[], &candidates, None, ReviewUnit::Step, &pack);
        let annotated =
            build_selection_messages(&t, &[], &candidates, Some(&notes), ReviewUnit::Step, &pack);
        assert_eq!(plain[0], annotated[0]);
        let plain_user = &plain[1].content;
        let annotated_user = &annotated[1].content;
        assert!(!plain_user.contains("Assessments:"));
        let expected = plain_user.replace(
            "Reply with \"SELECTED: <index>\".",
            "Assessments:\n[0] no issues found\n[1] drops a factor of 2\n\nReply with \"SELECTED: <index>\".",
        );
        assert_eq!(annotated_user, &expected);
    }

    #[test]
    fn step_messages_number_the_next_step() {
        let pack = PromptPack::default();
        let history = vec!["a".to_string(), "b".to_string()];
        let msgs = build_step_messages(&task(Domain::Math), &history, &pack);
        assert!(msgs[1].content.contains("Write step 3."));
    }

    #[test]
    fn answer_format_names_the_choices() {
        let t = Task::new(
            "t2",
            "pick",
            Domain::Biology,
            AnswerSpec::multiple_choice(["A", "B", "C", "D"]).unwrap(),
            "A",
            "unit",
        )
        .unwrap();
        assert_eq!(answer_format_line(&t), "The final answer is one of the choices: A, B, C, D.");
    }

    #[test]
    fn default_pack_validates() {
        assert!(PromptPack::default().validate().is_ok());
    }

    #[test]
    fn validation_catches_missing_placeholder() {
        let mut pack = PromptPack::default();
        pack.set_file("critique_user", "Problem: {problem}\nCandidate: {candidate}".to_string())
            .unwrap();
        match pack.validate() {
            Err(PromptError::MissingPlaceholder { placeholder, .. }) => {
                assert_eq!(placeholder, "{prior_steps}");
            }
            other => panic!("expected missing placeholder, got {other:?}"),
        }
    }

    #[test]
    fn set_file_rejects_unknown_stems() {
        let mut pack = PromptPack::default();
        assert!(pack.set_file("step_system", "solve it".to_string()).is_ok());
        assert_eq!(pack.step_system, "solve it");
        assert!(pack.set_file("mystery", String::new()).is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = PromptPack::default();
        let mut b = PromptPack::default();
        assert_eq!(a.digest(), b.digest());
        b.decision_system.push('!');
        assert_ne!(a.digest(), b.digest());
    }
}
