//! Benchmark harness around the core search logic: chat providers (scripted,
//! oracle, HTTP, replay), the search engine and baselines, run persistence,
//! and report rendering.

pub mod baselines;
pub mod config;
pub mod engine;
pub mod provider;
pub mod report;
pub mod runner;
pub mod synth;
pub mod util;

pub use config::HarnessConfig;
pub use engine::{run_greedy_baseline, run_panel, run_step_self_eval, EngineContext, Providers};
pub use provider::{ChatProvider, ProviderError};
pub use runner::{execute_run, RunOptions, RunRecord};
