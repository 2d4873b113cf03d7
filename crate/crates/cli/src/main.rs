//! `wot`: command-line front end for the evaluation harness.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use wot_core::ascii::{self, AsciiKind};
use wot_core::client::{Client, ProviderConfig};
use wot_core::harness::{
    self, build_report, classify_errors, load_dataset, load_labels, load_records, render_text, run_eval, run_pipeline,
    run_report, HarnessError, RunConfig, RunContext, RECORDS_FILE,
};
use wot_core::nav::{self, GenConfig, NavKind, RenderStyle, WorldParams};
use wot_core::sandbox::{PostProcessConfig, RunnerProfile, Sandbox};
use wot_core::strategy::{Strategy, StrategyKind, TaskProfile};
use wot_core::task::{TaskInstance, TaskKind};

#[derive(Parser)]
#[command(name = "wot", version, about = "Whiteboard-of-thought evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a source dataset into harness JSONL.
    ImportData {
        /// mnist, word, kanji, or navigation (or a geometry name as the
        /// default kind for plain navigation records).
        kind: String,
        src: PathBuf,
        dst: PathBuf,
        /// Keep a reproducible random subset of this size (ASCII only).
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate navigation instances.
    GenNav {
        /// Geometry, or `all` for every geometry.
        #[arg(long)]
        kind: String,
        /// Instances per geometry.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        grid_side: Option<usize>,
        #[arg(long)]
        cycle_len: Option<usize>,
        /// Phrase moves as turns relative to the current facing.
        #[arg(long)]
        relative_turns: bool,
    },
    /// Evaluate a dataset under one strategy.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Accuracy, usage and error breakdown for one or more runs.
    Report {
        /// Run id (repeatable).
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        /// Add published reference values next to measured ones.
        #[arg(long)]
        compare_paper: bool,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Print the machine-readable summary instead of text.
        #[arg(long)]
        json: bool,
        #[arg(long, default_value = "runs")]
        root: PathBuf,
    },
    /// Error taxonomy and review worklist for one run.
    ClassifyErrors {
        #[arg(long)]
        run: String,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        root: PathBuf,
    },
    /// One whiteboard query outside any dataset; prints the transcript.
    Ask {
        /// ascii, navigation, or a task-profile JSON file.
        #[arg(long)]
        profile: String,
        query: String,
        /// Provider config JSON file.
        #[arg(long)]
        provider: PathBuf,
        /// Runner command; the profile, script and output dir are appended.
        #[arg(long, num_args = 1.., required = true)]
        runner: Vec<String>,
        /// Runner profile; follows --profile when omitted.
        #[arg(long)]
        runner_profile: Option<RunnerProfile>,
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        #[arg(long, default_value = "runs/ask")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::ImportData {
            kind,
            src,
            dst,
            subsample,
            seed,
        } => import_data(&kind, &src, &dst, subsample.map(|n| (n, seed))),
        Command::GenNav {
            kind,
            n,
            steps,
            seed,
            out,
            grid_side,
            cycle_len,
            relative_turns,
        } => {
            let config = GenConfig {
                world: WorldParams {
                    grid_side: grid_side.unwrap_or(nav::DEFAULT_GRID_SIDE),
                    cycle_len,
                },
                style: RenderStyle { relative_turns },
            };
            gen_nav(&kind, n, steps, seed, &out, &config)
        }
        Command::Run { config } => run(&config),
        Command::Report {
            runs,
            compare_paper,
            labels,
            json,
            root,
        } => report(&root, &runs, compare_paper, labels.as_deref(), json),
        Command::ClassifyErrors { run, labels, root } => classify(&root, &run, labels.as_deref()),
        Command::Ask {
            profile,
            query,
            provider,
            runner,
            runner_profile,
            timeout,
            out,
        } => ask(&profile, &query, &provider, runner, runner_profile, timeout, &out),
    }
}

fn import_data(kind: &str, src: &Path, dst: &Path, subsample: Option<(usize, u64)>) -> Result<u8> {
    let count = if let Ok(ascii_kind) = kind.parse::<AsciiKind>() {
        let instances = ascii::import_bigbench(src, ascii_kind, subsample)?;
        ascii::write_instances(dst, &instances)?;
        instances.len()
    } else {
        let default_kind = match kind {
            "navigation" | "nav" => None,
            other => Some(other.parse::<NavKind>().map_err(|e| anyhow!("{e}"))?),
        };
        let instances: Vec<wot_core::NavInstance> = nav::read_instances(src, default_kind)?;
        for inst in &instances {
            inst.verify()?;
        }
        nav::write_instances(dst, &instances)?;
        instances.len()
    };
    println!("wrote {count} instances to {}", dst.display());
    Ok(0)
}

fn gen_nav(kind: &str, n: usize, steps: usize, seed: u64, out: &Path, config: &GenConfig) -> Result<u8> {
    let kinds = if kind == "all" {
        NavKind::ALL.to_vec()
    } else {
        vec![kind.parse::<NavKind>().map_err(|e| anyhow!("{e}"))?]
    };
    let mut instances: Vec<wot_core::NavInstance> = Vec::new();
    for k in kinds {
        instances.extend(nav::generate_batch(k, n, steps, seed, config)?);
    }
    nav::write_instances(out, &instances)?;
    println!("wrote {} instances to {}", instances.len(), out.display());
    Ok(0)
}

fn run(config: &Path) -> Result<u8> {
    let cfg = RunConfig::load(config)?;
    cfg.validate()?;
    let instances = load_dataset(cfg.task, &cfg.dataset, cfg.limit)?;
    let summary = run_eval(&cfg, &instances)?;
    let records = load_records(&summary.run_dir.join(RECORDS_FILE))?;
    let correct = records.iter().filter(|r| r.correct).count();
    println!(
        "run {}: {} instances, {} new, {} skipped, {} correct, {} errored",
        summary.run_id,
        summary.total,
        summary.new_records.len(),
        summary.skipped,
        correct,
        summary.errored
    );
    println!("records: {}", summary.run_dir.join(RECORDS_FILE).display());
    Ok(summary.exit_code() as u8)
}

fn run_records(root: &Path, run_id: &str) -> Result<Vec<wot_core::RunRecord>> {
    if !harness::is_safe_id(run_id) {
        bail!("invalid run id `{run_id}`");
    }
    let path = root.join(run_id).join(RECORDS_FILE);
    let records = load_records(&path)?;
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords).context(format!("run {run_id}"));
    }
    Ok(records)
}

fn labels_from(path: Option<&Path>) -> Result<Option<BTreeMap<String, String>>> {
    Ok(path.map(load_labels).transpose()?)
}

fn report(root: &Path, runs: &[String], compare_paper: bool, labels: Option<&Path>, json: bool) -> Result<u8> {
    let labels = labels_from(labels)?;
    let mut reports = Vec::new();
    for id in runs {
        reports.push(run_report(&run_records(root, id)?, labels.as_ref())?);
    }
    let report = build_report(reports, compare_paper);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", render_text(&report));
    }
    Ok(0)
}

fn classify(root: &Path, run_id: &str, labels: Option<&Path>) -> Result<u8> {
    let labels = labels_from(labels)?;
    let taxonomy = classify_errors(&run_records(root, run_id)?, labels.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&taxonomy)?);
    Ok(0)
}

fn ask_profile(profile: &str) -> Result<(TaskProfile, TaskKind, RunnerProfile)> {
    match profile {
        "ascii" => Ok((TaskProfile::ascii(), TaskKind::Word, RunnerProfile::Plotting)),
        "navigation" | "nav" => Ok((
            TaskProfile::navigation(),
            TaskKind::Navigation,
            RunnerProfile::TurtleGraphics,
        )),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading profile {path}"))?;
            let p: TaskProfile = serde_json::from_str(&text).with_context(|| format!("parsing profile {path}"))?;
            p.validate().map_err(|e| anyhow!(e))?;
            Ok((p, TaskKind::Word, RunnerProfile::Plotting))
        }
    }
}

fn ask(
    profile: &str,
    query: &str,
    provider: &Path,
    runner: Vec<String>,
    runner_profile: Option<RunnerProfile>,
    timeout: f64,
    out: &Path,
) -> Result<u8> {
    let (task_profile, kind, default_runner) = ask_profile(profile)?;
    let text = std::fs::read_to_string(provider).with_context(|| format!("reading {}", provider.display()))?;
    let provider_cfg: ProviderConfig = serde_json::from_str(&text)?;
    let client = Client::from_config(&provider_cfg)?;
    if !(timeout.is_finite() && timeout > 0.0) {
        bail!("timeout must be positive");
    }
    let sandbox = Sandbox::new(runner, Duration::from_secs_f64(timeout), 1);
    let instance = TaskInstance {
        id: "ask".into(),
        kind,
        input: query.to_string(),
        target: String::new(),
        group: None,
    };
    let ctx = RunContext {
        run_id: "ask",
        strategy: Strategy::new(StrategyKind::Wot),
        profile: task_profile,
        client: &client,
        sandbox: Some(&sandbox),
        runner_profile: runner_profile.unwrap_or(default_runner),
        post_process: PostProcessConfig::default(),
        render_margin_px: 0,
        run_dir: out.to_path_buf(),
    };
    let state = run_pipeline(&ctx, &instance);
    println!("{}", serde_json::to_string_pretty(&state.transcript)?);
    if let Some(failure) = &state.failure {
        eprintln!("failed: {} ({})", failure.category, failure.detail);
        return Ok(2);
    }
    println!("answer: {}", state.prediction.unwrap_or_default());
    Ok(0)
}
