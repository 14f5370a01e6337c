//! Run orchestration: executes one method over a dataset, persists every
//! artifact needed to reproduce the run, and verifies recorded runs.
//!
//! A run directory is self-contained:
//!
//! ```text
//! <out>/<run_id>/
//!   run.json              aggregate record (results, metrics inputs, usage)
//!   dataset.jsonl         canonical copy of the dataset that was run
//!   prompts.json          every prompt template, keyed by file stem
//!   replay-policy.jsonl   recorded responses (record mode only)
//!   replay-critic.jsonl   recorded critic responses (distinct critic only)
//!   traces/<task>.json    full per-task artifact, one per repetition
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use panel_core::chat::sha256_hex;
use panel_core::metrics::{
    divergence_by_step, divergence_samples_from_trace, DivergenceSample, DivergenceStat, Method,
    TaskResult,
};
use panel_core::task::{parse_dataset, render_dataset, Dataset, GradeResult, Task};
use panel_core::trace::{SearchConfig, SearchTrace};

use crate::baselines::{run_self_consistency, run_solution_select, SolutionOutcome};
use crate::config::{ConfigError, HarnessConfig, RunSettings};
use crate::engine::{run_greedy_baseline, run_panel, run_step_self_eval, EngineContext, Providers};
use crate::provider::{build_provider, ChatProvider, CountingProvider, ProviderError, ReplayProvider, RunUsage};

pub const RUN_SCHEMA_VERSION: u32 = 1;

/// The persisted per-task artifact: a step-level search trace or a
/// solution-level outcome, depending on the method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskArtifact {
    Search(SearchTrace),
    Solution(SolutionOutcome),
}

impl TaskArtifact {
    pub fn grade(&self) -> &GradeResult {
        match self {
            TaskArtifact::Search(trace) => &trace.grade,
            TaskArtifact::Solution(outcome) => &outcome.grade,
        }
    }
}

/// Everything that determines a run's outputs, recorded for provenance and
/// hashed into the run id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigSnapshot {
    pub dataset_name: String,
    pub dataset_digest: String,
    pub prompt_digest: String,
    pub policy_provider: String,
    pub critic_provider: String,
    pub search: SearchConfig,
    pub n_solutions: usize,
    pub k_samples: usize,
    pub max_tokens_solution: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub method: Method,
    pub config: RunConfigSnapshot,
    pub results: Vec<TaskResult>,
    /// Per-step counterfactual divergence, when the run computed it.
    pub divergence: Vec<DivergenceStat>,
    /// Trace file paths relative to the run directory, in execution order.
    pub trace_files: Vec<String>,
    pub usage: RunUsage,
    pub wall_clock_ms: u64,
}

/// How provider traffic is treated during a run.
#[derive(Debug, Clone)]
pub enum ReplaySetting {
    /// Talk to the configured providers directly, recording nothing.
    Off,
    /// Talk to the configured providers and record every response.
    Record,
    /// Serve every request from previously recorded logs; any unseen request
    /// fails the run.
    Strict {
        policy_log: PathBuf,
        critic_log: Option<PathBuf>,
        /// Descriptor to report instead of the generic strict-replay label,
        /// so reruns snapshot identically to the recorded run.
        policy_label: Option<String>,
        critic_label: Option<String>,
    },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Parent directory; the run writes into `<out_root>/<run_id>`.
    pub out_root: PathBuf,
    pub replay: ReplaySetting,
    /// Suppress per-task progress lines on stderr.
    pub quiet: bool,
}

pub struct RunSummary {
    pub record: RunRecord,
    pub run_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("runs cover different datasets ({a} vs {b})")]
    DatasetMismatch { a: String, b: String },
    #[error("cannot verify {0}")]
    Verify(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// File-system-safe stems for task trace files, unique per task.
fn trace_stems(tasks: &[Task]) -> Vec<String> {
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    tasks
        .iter()
        .map(|task| {
            let stem: String = task
                .id
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
                .collect();
            let n = used.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}~{}", *n - 1)
            }
        })
        .collect()
}

fn run_method(ctx: &EngineContext, task: &Task, method: Method, n_solutions: usize) -> TaskArtifact {
    match method {
        Method::Panel => TaskArtifact::Search(run_panel(ctx, task)),
        Method::Greedy => TaskArtifact::Search(run_greedy_baseline(ctx, task)),
        Method::StepSelfEval => TaskArtifact::Search(run_step_self_eval(ctx, task)),
        Method::SelfConsistency => TaskArtifact::Solution(run_self_consistency(ctx, task, n_solutions)),
        Method::SolutionSelect => TaskArtifact::Solution(run_solution_select(ctx, task, n_solutions, false)),
        Method::SolutionSelectCritique => {
            TaskArtifact::Solution(run_solution_select(ctx, task, n_solutions, true))
        }
    }
}

struct BuiltProviders {
    policy: Arc<CountingProvider>,
    critic: Arc<CountingProvider>,
    distinct_critic: bool,
}

impl BuiltProviders {
    fn usage(&self) -> RunUsage {
        let mut usage = self.policy.usage();
        if self.distinct_critic {
            let critic = self.critic.usage();
            usage.requests += critic.requests;
            usage.prompt_tokens += critic.prompt_tokens;
            usage.completion_tokens += critic.completion_tokens;
        }
        usage
    }
}

type SharedProvider = Arc<dyn ChatProvider>;

/// Builds the provider stack minus any record-mode wrapper, which needs the
/// run directory and is added by `wrap_recording` once the run id is known.
fn build_base_providers(
    config: &HarnessConfig,
    replay: &ReplaySetting,
) -> Result<(SharedProvider, SharedProvider, bool), RunError> {
    match replay {
        ReplaySetting::Strict { policy_log, critic_log, policy_label, critic_label } => {
            let policy: Arc<dyn ChatProvider> = Arc::new(match policy_label {
                Some(label) => ReplayProvider::strict_as(policy_log, label)?,
                None => ReplayProvider::strict(policy_log)?,
            });
            match critic_log {
                Some(log) => {
                    let critic: Arc<dyn ChatProvider> = Arc::new(match critic_label {
                        Some(label) => ReplayProvider::strict_as(log, label)?,
                        None => ReplayProvider::strict(log)?,
                    });
                    Ok((policy, critic, true))
                }
                None => Ok((policy.clone(), policy, false)),
            }
        }
        ReplaySetting::Off | ReplaySetting::Record => {
            let policy = build_provider(&config.policy)?;
            let critic_config = config.critic_config();
            if critic_config == config.policy {
                Ok((policy.clone(), policy, false))
            } else {
                Ok((policy.clone(), build_provider(&critic_config)?, true))
            }
        }
    }
}

fn wrap_recording(
    policy: SharedProvider,
    critic: SharedProvider,
    distinct_critic: bool,
    replay: &ReplaySetting,
    run_dir: &Path,
) -> Result<(SharedProvider, SharedProvider), RunError> {
    if !matches!(replay, ReplaySetting::Record) {
        return Ok((policy, critic));
    }
    let recording_policy: SharedProvider =
        Arc::new(ReplayProvider::record(policy, run_dir.join("replay-policy.jsonl"))?);
    let recording_critic: SharedProvider = if distinct_critic {
        Arc::new(ReplayProvider::record(critic, run_dir.join("replay-critic.jsonl"))?)
    } else {
        recording_policy.clone()
    };
    Ok((recording_policy, recording_critic))
}

/// Runs `method` over every task in the dataset and persists a complete run
/// directory under `options.out_root`. An existing directory for the same
/// run id is replaced.
pub fn execute_run(
    config: &HarnessConfig,
    dataset: &Dataset,
    method: Method,
    options: &RunOptions,
) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    config.validate()?;
    if dataset.tasks.is_empty() {
        return Err(RunError::Dataset("dataset has no tasks".to_string()));
    }
    let pack = config.load_prompt_pack()?;
    let dataset_text = render_dataset(dataset);

    let (base_policy, base_critic, distinct_critic) = build_base_providers(config, &options.replay)?;
    let snapshot = RunConfigSnapshot {
        dataset_name: dataset.name.clone(),
        dataset_digest: sha256_hex(dataset_text.as_bytes()),
        prompt_digest: pack.digest(),
        policy_provider: base_policy.descriptor(),
        critic_provider: base_critic.descriptor(),
        search: config.search.clone(),
        n_solutions: config.run.n_solutions,
        k_samples: config.run.k_samples,
        max_tokens_solution: config.run.max_tokens_solution,
    };
    let identity = serde_json::to_string(&(method.as_str(), &snapshot))?;
    let run_id = format!("{}-{}", method.as_str(), &sha256_hex(identity.as_bytes())[..12]);

    let run_dir = options.out_root.join(&run_id);
    if run_dir.exists() {
        fs::remove_dir_all(&run_dir).map_err(io_err(&run_dir))?;
    }
    let traces_dir = run_dir.join("traces");
    fs::create_dir_all(&traces_dir).map_err(io_err(&traces_dir))?;

    let (policy, critic) = wrap_recording(base_policy, base_critic, distinct_critic, &options.replay, &run_dir)?;
    let built = BuiltProviders {
        policy: Arc::new(CountingProvider::new(policy)),
        critic: Arc::new(CountingProvider::new(critic)),
        distinct_critic,
    };
    let providers = Providers {
        policy: built.policy.clone() as Arc<dyn ChatProvider>,
        critic: if distinct_critic {
            built.critic.clone() as Arc<dyn ChatProvider>
        } else {
            built.policy.clone() as Arc<dyn ChatProvider>
        },
    };

    let reps = config.run.k_samples;
    let stems = trace_stems(&dataset.tasks);
    let mut results: Vec<TaskResult> = Vec::with_capacity(dataset.tasks.len());
    let mut divergence_samples: Vec<DivergenceSample> = Vec::new();
    let mut trace_files: Vec<String> = Vec::new();

    for (index, task) in dataset.tasks.iter().enumerate() {
        let mut outcomes = Vec::with_capacity(reps);
        for rep in 0..reps {
            let tag_prefix = if reps == 1 {
                format!("task={}", task.id)
            } else {
                format!("task={};rep={rep}", task.id)
            };
            let ctx = EngineContext {
                config: &config.search,
                pack: &pack,
                providers: &providers,
                tag_prefix,
                max_tokens_solution: config.run.max_tokens_solution,
            };
            let artifact = run_method(&ctx, task, method, config.run.n_solutions);
            let file = if reps == 1 {
                format!("traces/{}.json", stems[index])
            } else {
                format!("traces/{}.r{rep}.json", stems[index])
            };
            write_json(&run_dir.join(&file), &artifact)?;
            trace_files.push(file);
            if rep == 0 {
                if let TaskArtifact::Search(trace) = &artifact {
                    divergence_samples.extend(divergence_samples_from_trace(trace));
                }
            }
            outcomes.push(artifact.grade().correct);
        }
        if !options.quiet {
            let status = if reps == 1 {
                if outcomes[0] { "correct".to_string() } else { "incorrect".to_string() }
            } else {
                format!("{}/{} correct", outcomes.iter().filter(|&&c| c).count(), reps)
            };
            eprintln!("[{}/{}] {} {}", index + 1, dataset.tasks.len(), task.id, status);
        }
        results.push(TaskResult {
            task_id: task.id.clone(),
            method,
            domain: task.domain,
            source: task.source.clone(),
            correct: outcomes[0],
            sample_outcomes: (reps > 1).then(|| outcomes.clone()),
        });
    }

    let record = RunRecord {
        schema_version: RUN_SCHEMA_VERSION,
        run_id: run_id.clone(),
        method,
        config: snapshot,
        results,
        divergence: divergence_by_step(&divergence_samples),
        trace_files,
        usage: built.usage(),
        wall_clock_ms: started.elapsed().as_millis() as u64,
    };

    let dataset_path = run_dir.join("dataset.jsonl");
    fs::write(&dataset_path, &dataset_text).map_err(io_err(&dataset_path))?;
    let prompt_map: BTreeMap<&str, &str> = pack.files().into_iter().collect();
    write_json(&run_dir.join("prompts.json"), &prompt_map)?;
    write_json(&run_dir.join("run.json"), &record)?;

    Ok(RunSummary { record, run_dir })
}

/// Loads the aggregate record of a completed run directory.
pub fn load_run(run_dir: &Path) -> Result<RunRecord, RunError> {
    read_json(&run_dir.join("run.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub run_id: String,
    pub traces_checked: usize,
    /// Human-readable descriptions of every difference; empty means verified.
    pub mismatches: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-executes a recorded run strictly from its own replay logs, in a
/// scratch directory, and checks that every persisted artifact comes out
/// byte-identical.
pub fn replay_verify(run_dir: &Path) -> Result<VerifyReport, RunError> {
    let record = load_run(run_dir)?;
    let policy_log = run_dir.join("replay-policy.jsonl");
    if !policy_log.exists() {
        return Err(RunError::Verify(format!(
            "{}: no replay-policy.jsonl; the run was not recorded",
            run_dir.display()
        )));
    }
    let critic_log = run_dir.join("replay-critic.jsonl");
    let critic_log = critic_log.exists().then_some(critic_log);

    let dataset_path = run_dir.join("dataset.jsonl");
    let dataset_text = fs::read_to_string(&dataset_path).map_err(io_err(&dataset_path))?;
    let (dataset, _) = parse_dataset(&record.config.dataset_name, &dataset_text)
        .map_err(|e| RunError::Dataset(e.to_string()))?;

    let prompts: BTreeMap<String, String> = read_json(&run_dir.join("prompts.json"))?;
    let scratch = tempfile::tempdir().map_err(io_err(run_dir))?;
    let prompt_dir = scratch.path().join("prompts");
    fs::create_dir_all(&prompt_dir).map_err(io_err(&prompt_dir))?;
    for (stem, text) in &prompts {
        let path = prompt_dir.join(format!("{stem}.txt"));
        fs::write(&path, text).map_err(io_err(&path))?;
    }

    let config = HarnessConfig {
        search: record.config.search.clone(),
        run: RunSettings {
            n_solutions: record.config.n_solutions,
            k_samples: record.config.k_samples,
            max_tokens_solution: record.config.max_tokens_solution,
            prompt_pack: Some(prompt_dir.display().to_string()),
        },
        ..HarnessConfig::default()
    };

    let options = RunOptions {
        out_root: scratch.path().join("rerun"),
        replay: ReplaySetting::Strict {
            policy_log,
            critic_log,
            policy_label: Some(record.config.policy_provider.clone()),
            critic_label: Some(record.config.critic_provider.clone()),
        },
        quiet: true,
    };
    let rerun = execute_run(&config, &dataset, record.method, &options)?;

    let mut mismatches = Vec::new();
    let mut original = record.clone();
    let mut replayed = rerun.record.clone();
    original.wall_clock_ms = 0;
    replayed.wall_clock_ms = 0;
    if original.run_id != replayed.run_id {
        mismatches.push(format!("run id changed: {} vs {}", original.run_id, replayed.run_id));
    }
    if original.results != replayed.results {
        mismatches.push("per-task results differ".to_string());
    }
    if original.divergence != replayed.divergence {
        mismatches.push("divergence statistics differ".to_string());
    }
    if original.usage != replayed.usage {
        mismatches.push(format!("usage differs: {:?} vs {:?}", original.usage, replayed.usage));
    }
    if original != replayed && mismatches.is_empty() {
        mismatches.push("run records differ".to_string());
    }

    for file in &record.trace_files {
        let original_path = run_dir.join(file);
        let replayed_path = rerun.run_dir.join(file);
        let original_bytes = fs::read(&original_path).map_err(io_err(&original_path))?;
        let replayed_bytes = fs::read(&replayed_path).map_err(io_err(&replayed_path))?;
        if original_bytes != replayed_bytes {
            mismatches.push(format!("trace {file} differs"));
        }
    }

    Ok(VerifyReport { run_id: record.run_id, traces_checked: record.trace_files.len(), mismatches })
}

/// Per-task agreement between two runs over the same dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub run_a: String,
    pub run_b: String,
    pub method_a: Method,
    pub method_b: Method,
    pub dataset: String,
    pub total: usize,
    pub correct_a: usize,
    pub correct_b: usize,
    /// Tasks the first run missed and the second solved.
    pub gains: Vec<String>,
    /// Tasks the first run solved and the second missed.
    pub regressions: Vec<String>,
}

pub fn compare_runs(a: &RunRecord, b: &RunRecord) -> Result<CompareReport, RunError> {
    if a.config.dataset_digest != b.config.dataset_digest {
        return Err(RunError::DatasetMismatch {
            a: a.config.dataset_name.clone(),
            b: b.config.dataset_name.clone(),
        });
    }
    let by_id: BTreeMap<&str, bool> = b.results.iter().map(|r| (r.task_id.as_str(), r.correct)).collect();
    let mut gains = Vec::new();
    let mut regressions = Vec::new();
    for result in &a.results {
        let Some(&b_correct) = by_id.get(result.task_id.as_str()) else {
            return Err(RunError::Verify(format!(
                "task {} present in {} but missing from {}",
                result.task_id, a.run_id, b.run_id
            )));
        };
        match (result.correct, b_correct) {
            (false, true) => gains.push(result.task_id.clone()),
            (true, false) => regressions.push(result.task_id.clone()),
            _ => {}
        }
    }
    Ok(CompareReport {
        run_a: a.run_id.clone(),
        run_b: b.run_id.clone(),
        method_a: a.method,
        method_b: b.method,
        dataset: a.config.dataset_name.clone(),
        total: a.results.len(),
        correct_a: a.results.iter().filter(|r| r.correct).count(),
        correct_b: b.results.iter().filter(|r| r.correct).count(),
        gains,
        regressions,
    })
}
