//! Core types and pure logic for step-level search with natural-language
//! self-critique: task grading, chat requests, critique and decision parsing,
//! prompt construction, search traces, consensus voting, and metrics.
//!
//! This crate is `no_std` + `alloc`; everything that touches IO, clocks, or
//! HTTP lives in the companion harness crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod answer;
pub mod chat;
pub mod consensus;
pub mod critique;
pub mod decision;
pub mod metrics;
pub mod prompts;
pub mod task;
pub mod trace;

pub use answer::{AnswerKind, AnswerSpec, ExtractOutcome};
pub use chat::{ChatMessage, ChatRequest, ChatResponse, FinishReason, Role, TokenUsage};
pub use consensus::{majority_vote, VoteOutcome};
pub use critique::{parse_critique, Correctness, Critique};
pub use decision::{parse_score, parse_selection, select_argmax, Decision, SelfEvalScore};
pub use metrics::{
    accuracy, divergence_by_step, pass_at_k, percent_1dp, DivergenceSample, DivergenceStat,
    Method, TaskResult,
};
pub use prompts::PromptPack;
pub use task::{grade, parse_dataset, render_dataset, Dataset, Domain, GradeResult, Task};
pub use trace::{
    is_terminal, CandidateSet, ConfigSnapshot, Origin, SearchConfig, SearchTrace, StepCandidate,
    StepRecord, TerminationReason,
};
