//! Generator for the synthetic arithmetic-chain dataset.
//!
//! Each task walks a short chain of integer operations and asks for the final
//! value. The prompt carries an `ORACLE` control line so the scripted-oracle
//! provider can answer deterministically, which gives offline runs a planted
//! ground truth: search guided by critiques solves every task, greedy
//! decoding and critique-free selection fail every task.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use panel_core::answer::AnswerSpec;
use panel_core::task::{Dataset, Domain, Task};

use crate::provider::oracle::Op;

pub const DEFAULT_COUNT: usize = 200;
pub const DEFAULT_SEED: u64 = 42;
pub const SOURCE: &str = "synthetic-v1";

/// Largest sampled-candidate index the planted correct step may land on,
/// matching the default of five candidates per step (indices 1 through 4).
const MAX_SLOT: usize = 4;

fn chain_values(start: i64, ops: &[Op]) -> Vec<i64> {
    let mut values = vec![start];
    for op in ops {
        values.push(op.apply(*values.last().unwrap()));
    }
    values
}

/// The final value of the planted wrong chain: the twist step overshoots by
/// the oracle's candidate-zero error and the remaining operations propagate it.
fn wrong_final(values: &[i64], ops: &[Op], twist: usize) -> i64 {
    let delta = (twist % 3 + 1) as i64;
    let mut value = values[twist] + delta;
    for op in &ops[twist..] {
        value = op.apply(value);
    }
    value
}

fn in_answer_range(v: i64) -> bool {
    (1..=999).contains(&v)
}

fn build_prompt(start: i64, ops: &[Op], twist: usize, slot: usize) -> String {
    let mut prompt = format!("A running value starts at {start}.\n");
    for (i, op) in ops.iter().enumerate() {
        prompt.push_str(&format!("Step {}: {}.\n", i + 1, op.display()));
    }
    prompt.push_str("Work through the steps one at a time and report the final value.\n");
    let tokens: Vec<String> = ops.iter().map(Op::token).collect();
    prompt.push_str(&format!("ORACLE start={start} ops={} twist={twist} slot={slot}", tokens.join("|")));
    prompt
}

/// Generates `count` tasks from `seed`, deterministically. Rejected drafts
/// (chains leaving the 1 to 999 answer range) advance the stream, so the
/// output is a pure function of both arguments.
pub fn generate(count: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks: Vec<Task> = Vec::with_capacity(count);
    while tasks.len() < count {
        let steps = rng.random_range(2..=4);
        let start = rng.random_range(5..=30);
        let mut ops: Vec<Op> = Vec::with_capacity(steps);
        let mut value: i64 = start;
        let mut muls = 0;
        for _ in 0..steps {
            let op = loop {
                match rng.random_range(0..3u32) {
                    0 => break Op::Add(rng.random_range(2..=9)),
                    1 if muls < 2 && value <= 300 => {
                        muls += 1;
                        break Op::Mul(rng.random_range(2..=3));
                    }
                    2 if value >= 10 => break Op::Sub(rng.random_range(1..=9)),
                    _ => {}
                }
            };
            value = op.apply(value);
            ops.push(op);
        }
        let twist = rng.random_range(1..=steps);
        let slot = rng.random_range(1..=MAX_SLOT);

        let values = chain_values(start, &ops);
        let wrong = wrong_final(&values, &ops, twist);
        if !values.iter().copied().all(in_answer_range) || !in_answer_range(wrong) {
            continue;
        }

        let index = tasks.len();
        let domain = Domain::ALL[index % Domain::ALL.len()];
        let gold = values.last().unwrap().to_string();
        let task = Task::new(
            format!("synth-{index:04}"),
            build_prompt(start, &ops, twist, slot),
            domain,
            AnswerSpec::integer(),
            &gold,
            SOURCE,
        )
        .expect("generated task is well formed");
        tasks.push(task);
    }
    Dataset { name: "synth".to_string(), tasks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_greedy_baseline, run_panel, EngineContext, Providers};
    use crate::provider::OracleProvider;
    use panel_core::prompts::PromptPack;
    use panel_core::task::render_dataset;
    use panel_core::trace::SearchConfig;
    use std::sync::Arc;

    #[test]
    fn generation_is_deterministic() {
        let a = generate(25, DEFAULT_SEED);
        let b = generate(25, DEFAULT_SEED);
        assert_eq!(render_dataset(&a), render_dataset(&b));
        let c = generate(25, 7);
        assert_ne!(render_dataset(&a), render_dataset(&c));
    }

    #[test]
    fn ids_are_contiguous_and_domains_cycle() {
        let dataset = generate(20, DEFAULT_SEED);
        for (i, task) in dataset.tasks.iter().enumerate() {
            assert_eq!(task.id, format!("synth-{i:04}"));
            assert_eq!(task.domain, Domain::ALL[i % Domain::ALL.len()]);
            assert_eq!(task.source, SOURCE);
        }
    }

    #[test]
    fn golds_are_canonical_in_range_integers() {
        let dataset = generate(60, DEFAULT_SEED);
        for task in &dataset.tasks {
            let v: i64 = task.gold.parse().unwrap();
            assert!((1..=999).contains(&v), "gold {v} out of range for {}", task.id);
            assert_eq!(task.answer_spec.normalize(&task.gold).unwrap(), task.gold);
        }
    }

    #[test]
    fn prompts_embed_a_parseable_control_line() {
        let dataset = generate(10, DEFAULT_SEED);
        for task in &dataset.tasks {
            let line = task.prompt.lines().last().unwrap();
            assert!(line.starts_with("ORACLE start="), "missing control line in {}", task.id);
            assert!(line.contains(" ops="));
            assert!(line.contains(" twist="));
            assert!(line.contains(" slot="));
        }
    }

    #[test]
    fn oracle_separates_search_from_greedy_on_every_task() {
        let dataset = generate(DEFAULT_COUNT, DEFAULT_SEED);
        assert_eq!(dataset.tasks.len(), DEFAULT_COUNT);
        let config = SearchConfig::default();
        let pack = PromptPack::default();
        let providers =
            Providers { policy: Arc::new(OracleProvider::new()), critic: Arc::new(OracleProvider::new()) };
        for task in &dataset.tasks {
            let ctx = EngineContext::new(&config, &pack, &providers, &task.id);
            let searched = run_panel(&ctx, task);
            assert!(searched.grade.correct, "search failed on {}: {:?}", task.id, searched.grade);
            let greedy = run_greedy_baseline(&ctx, task);
            assert!(!greedy.grade.correct, "greedy unexpectedly solved {}", task.id);
            assert!(greedy.grade.extracted.is_some(), "greedy answer failed to parse on {}", task.id);
        }
    }
}
