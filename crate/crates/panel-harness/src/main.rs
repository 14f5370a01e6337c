use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use panel_core::metrics::Method;
use panel_core::task::{parse_dataset, render_dataset, Dataset};
use panel_harness::report::{accuracy_tsv, render_compare, render_report, render_verify};
use panel_harness::runner::{compare_runs, execute_run, load_run, replay_verify, ReplaySetting, RunOptions};
use panel_harness::synth;
use panel_harness::HarnessConfig;

#[derive(Parser)]
#[command(
    name = "panel",
    version,
    about = "Step-level search over candidate reasoning steps, with baselines, replay, and reporting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over a dataset and persist a run directory.
    Run(RunArgs),
    /// Render accuracy tables for one or more completed runs.
    Report(ReportArgs),
    /// Compare per-task outcomes of two runs over the same dataset.
    Compare(CompareArgs),
    /// Re-execute a recorded run from its replay log and check artifacts.
    ReplayVerify(VerifyArgs),
    /// Generate the deterministic synthetic dataset.
    GenSynth(GenSynthArgs),
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let known: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
        format!("unknown method {s:?}; expected one of: {}", known.join(", "))
    })
}

#[derive(Args)]
struct RunArgs {
    /// Task file, one JSON object per line.
    #[arg(long)]
    dataset: PathBuf,
    /// Method to evaluate.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// TOML config; defaults to the scripted-oracle provider.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory for run output.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override run.n_solutions (solution-level sample count).
    #[arg(long)]
    n: Option<usize>,
    /// Override run.k_samples (repetitions per task, for pass@k).
    #[arg(long)]
    k_samples: Option<usize>,
    /// off: live, unrecorded; record: live, log every response;
    /// strict: serve entirely from --replay-log.
    #[arg(long, value_parser = ["off", "record", "strict"], default_value = "record")]
    replay: String,
    /// Replay log for --replay strict.
    #[arg(long)]
    replay_log: Option<PathBuf>,
    /// Separate critic replay log for --replay strict, when one was recorded.
    #[arg(long)]
    replay_critic_log: Option<PathBuf>,
    /// Override search.concurrency_limit.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Also record what the selector would pick without critiques.
    #[arg(long)]
    counterfactual: bool,
    /// Directory of prompt template overrides.
    #[arg(long)]
    prompt_pack: Option<PathBuf>,
    /// Suppress per-task progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Completed run directories.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Also write the accuracy table as TSV to this path.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    run_a: PathBuf,
    run_b: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    run: PathBuf,
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long, default_value_t = synth::DEFAULT_COUNT)]
    count: usize,
    #[arg(long, default_value_t = synth::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "data/synth.tasks")]
    out: PathBuf,
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read dataset {}", path.display()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    let (dataset, warnings) =
        parse_dataset(&name, &text).with_context(|| format!("cannot parse dataset {}", path.display()))?;
    for warning in warnings {
        eprintln!("warning: {} line {}: {}", name, warning.line, warning.message);
    }
    Ok(dataset)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => HarnessConfig::load(path)?,
        None => HarnessConfig::default(),
    };
    if let Some(n) = args.n {
        config.run.n_solutions = n;
    }
    if let Some(k) = args.k_samples {
        config.run.k_samples = k;
    }
    if let Some(limit) = args.concurrency {
        config.search.concurrency_limit = limit;
    }
    if args.counterfactual {
        config.search.compute_counterfactual = true;
    }
    if let Some(dir) = &args.prompt_pack {
        config.run.prompt_pack = Some(dir.display().to_string());
    }
    config.validate()?;

    let dataset = load_dataset(&args.dataset)?;
    let replay = match args.replay.as_str() {
        "off" => ReplaySetting::Off,
        "record" => ReplaySetting::Record,
        _ => {
            let policy_log = args.replay_log.context("--replay strict requires --replay-log")?;
            ReplaySetting::Strict {
                policy_log,
                critic_log: args.replay_critic_log,
                policy_label: None,
                critic_label: None,
            }
        }
    };
    let options = RunOptions { out_root: args.out, replay, quiet: args.quiet };
    let summary = execute_run(&config, &dataset, args.method, &options)?;
    print!("{}", render_report(std::slice::from_ref(&summary.record)));
    println!("\nrun directory: {}", summary.run_dir.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut records = Vec::with_capacity(args.runs.len());
    for dir in &args.runs {
        records.push(load_run(dir).with_context(|| format!("cannot load run {}", dir.display()))?);
    }
    print!("{}", render_report(&records));
    if let Some(path) = &args.tsv {
        fs::write(path, accuracy_tsv(&records))
            .with_context(|| format!("cannot write {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let a = load_run(&args.run_a).with_context(|| format!("cannot load run {}", args.run_a.display()))?;
    let b = load_run(&args.run_b).with_context(|| format!("cannot load run {}", args.run_b.display()))?;
    let report = compare_runs(&a, &b)?;
    print!("{}", render_compare(&report));
    Ok(())
}

fn cmd_replay_verify(args: VerifyArgs) -> Result<()> {
    let report = replay_verify(&args.run)?;
    print!("{}", render_verify(&report));
    if !report.ok() {
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_gen_synth(args: GenSynthArgs) -> Result<()> {
    let dataset = synth::generate(args.count, args.seed);
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
    }
    fs::write(&args.out, render_dataset(&dataset))
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    println!("wrote {} tasks to {}", dataset.tasks.len(), args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
        Command::Compare(args) => cmd_compare(args),
        Command::ReplayVerify(args) => cmd_replay_verify(args),
        Command::GenSynth(args) => cmd_gen_synth(args),
    }
}
