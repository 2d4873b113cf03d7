use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use image::DynamicImage;
use serde::Serialize;

use super::config::is_safe_id;
use super::record::{write_atomic, write_transcript, RecordStore, Timing};
use super::{HarnessError, RunConfig, RunRecord};
use crate::ascii::{self, rasterize_ascii, GlyphFont};
use crate::client::{default_params, Client, ClientError, CompletionRequest, QueryStage, RequestTag, Usage};
use crate::nav;
use crate::sandbox::{self, prepare_for_query, ExecutionResult, PostProcessConfig, RunnerProfile, Sandbox};
use crate::strategy::{
    advance, build_messages, Event, ImageRef, PipelineState, PreparedImage, Stage, Strategy, StrategyKind, TaskProfile,
};
use crate::task::{ErrorCategory, TaskInstance, TaskKind};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const CONFIG_FILE: &str = "config.json";
pub const TRANSCRIPTS_DIR: &str = "transcripts";
pub const ARTIFACTS_DIR: &str = "artifacts";

/// Loads a dataset file for `task` as harness instances. Navigation
/// instances with structured fields are re-verified on load.
pub fn load_dataset(task: TaskKind, path: &Path, limit: Option<usize>) -> Result<Vec<TaskInstance>, HarnessError> {
    let data_err = |m: String| HarnessError::Dataset(format!("{}: {m}", path.display()));
    let mut instances: Vec<TaskInstance> = if task.is_ascii() {
        let items = ascii::read_instances(path).map_err(|e| data_err(e.to_string()))?;
        if let Some(bad) = items.iter().find(|i| i.kind.task_kind() != task) {
            return Err(data_err(format!(
                "instance {} is {}, expected {task}",
                bad.id,
                bad.kind.as_str()
            )));
        }
        items.iter().map(|i| i.to_task()).collect()
    } else {
        let items: Vec<nav::NavInstance<f64>> = nav::read_instances(path, None).map_err(|e| data_err(e.to_string()))?;
        for item in &items {
            item.verify().map_err(|e| data_err(e.to_string()))?;
        }
        items.iter().map(|i| i.to_task()).collect()
    };
    if let Some(limit) = limit {
        instances.truncate(limit);
    }
    let mut seen = BTreeSet::new();
    for inst in &instances {
        if !is_safe_id(&inst.id) {
            return Err(data_err(format!("instance id `{}` is not filesystem-safe", inst.id)));
        }
        if !seen.insert(inst.id.as_str()) {
            return Err(data_err(format!("duplicate instance id `{}`", inst.id)));
        }
    }
    Ok(instances)
}

/// Shared, read-only state for the workers of one run.
pub struct RunContext<'a> {
    pub run_id: &'a str,
    pub strategy: Strategy,
    pub profile: TaskProfile,
    pub client: &'a Client,
    pub sandbox: Option<&'a Sandbox>,
    pub runner_profile: RunnerProfile,
    pub post_process: PostProcessConfig,
    pub render_margin_px: u32,
    pub run_dir: PathBuf,
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn rel(path: &Path, base: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

fn archive_image(
    ctx: &RunContext<'_>,
    dir: &Path,
    name: &str,
    prepared: sandbox::PreparedPayload,
) -> Result<PreparedImage, HarnessError> {
    let path = dir.join(name);
    write_atomic(&path, &prepared.payload.bytes)?;
    Ok(PreparedImage {
        image: ImageRef {
            artifact: Some(rel(&path, &ctx.run_dir)),
            width: prepared.width,
            height: prepared.height,
            sha256: Some(prepared.payload.sha256()),
        },
        payload: prepared.payload,
    })
}

fn fixed_render(ctx: &RunContext<'_>, instance: &TaskInstance, dir: &Path) -> Result<PreparedImage, HarnessError> {
    let raster = rasterize_ascii(&instance.input, GlyphFont::embedded(), ctx.render_margin_px);
    let image = DynamicImage::ImageLuma8(raster);
    let raw = sandbox::encode_png(&image).map_err(|e| HarnessError::Internal(e.to_string()))?;
    write_atomic(&dir.join("render.png"), &raw)?;
    let prepared =
        sandbox::prepare_image(&image, &ctx.post_process).map_err(|e| HarnessError::Internal(e.to_string()))?;
    archive_image(ctx, dir, "query.png", prepared)
}

fn stage_params(state: &PipelineState) -> QueryStage {
    match (state.strategy.kind, state.stage) {
        (StrategyKind::Wot, Stage::AwaitingImageAnswer) | (StrategyKind::FixedRender, _) => QueryStage::ImageFollowup,
        _ => QueryStage::Initial,
    }
}

fn query(ctx: &RunContext<'_>, instance: &TaskInstance, mut state: PipelineState) -> PipelineState {
    let image = state.pending_image.as_ref().map(|p| &p.payload);
    let messages = match build_messages(
        &state.strategy,
        state.stage,
        instance,
        &ctx.profile,
        &state.transcript,
        image,
    ) {
        Ok(m) => m,
        Err(e) => return state.fail(ErrorCategory::ProviderError, format!("internal: {e}")),
    };
    let params = default_params(stage_params(&state));
    let turn = state.turn();
    state.record_request(&messages);
    let request = CompletionRequest {
        messages,
        params,
        tag: RequestTag::new(instance.id.clone(), turn),
    };
    match ctx.client.complete(&request) {
        Ok(completion) => match advance(state.clone(), Event::Completion(completion)) {
            Ok(next) => next,
            Err(e) => state.fail(ErrorCategory::ProviderError, format!("internal: {e}")),
        },
        Err(ClientError::ContentFiltered) => state.fail(ErrorCategory::ContentFiltered, "content filtered"),
        Err(e) => state.fail(ErrorCategory::ProviderError, e.to_string()),
    }
}

fn execute(ctx: &RunContext<'_>, dir: &Path, state: PipelineState) -> PipelineState {
    let Some(sandbox) = ctx.sandbox else {
        return state.fail(ErrorCategory::CodeExecution, "no sandbox configured");
    };
    let script = state.pending_script.clone().unwrap_or_default();
    let work_dir = dir.join("exec");
    if work_dir.exists() {
        if let Err(e) = std::fs::remove_dir_all(&work_dir) {
            return state.fail(
                ErrorCategory::CodeExecution,
                format!("cleaning {}: {e}", work_dir.display()),
            );
        }
    }
    let result = match sandbox.execute(&script, ctx.runner_profile, &work_dir) {
        Ok(r) => r,
        Err(e) => return state.fail(ErrorCategory::CodeExecution, format!("sandbox: {e}")),
    };
    let archived = result.relative_to(&ctx.run_dir);
    let next = match advance(state.clone(), Event::Execution(archived)) {
        Ok(next) => next,
        Err(e) => return state.fail(ErrorCategory::ProviderError, format!("internal: {e}")),
    };
    if next.stage != Stage::AwaitingImageAnswer {
        return next;
    }
    attach_image(ctx, dir, next, &result)
}

fn attach_image(ctx: &RunContext<'_>, dir: &Path, state: PipelineState, result: &ExecutionResult) -> PipelineState {
    let prepared = match prepare_for_query(result, &ctx.post_process) {
        Ok(p) => p,
        Err(e) => return state.fail(ErrorCategory::CodeExecution, format!("image post-processing: {e}")),
    };
    let image = match archive_image(ctx, dir, "query.png", prepared) {
        Ok(i) => i,
        Err(e) => return state.fail(ErrorCategory::CodeExecution, format!("archiving image: {e}")),
    };
    match advance(state.clone(), Event::ImageReady(image)) {
        Ok(next) => next,
        Err(e) => state.fail(ErrorCategory::ProviderError, format!("internal: {e}")),
    }
}

/// Drives one instance through its strategy until `Done` or `Failed`.
/// Images and runner output land under `artifacts/<instance id>/`.
pub fn run_pipeline(ctx: &RunContext<'_>, instance: &TaskInstance) -> PipelineState {
    let dir = ctx.run_dir.join(ARTIFACTS_DIR).join(&instance.id);
    let mut state = PipelineState::new(ctx.strategy, &ctx.profile);
    while !state.stage.is_terminal() {
        state = match (state.strategy.kind, state.stage) {
            (StrategyKind::FixedRender, Stage::Start) if state.pending_image.is_none() => {
                match fixed_render(ctx, instance, &dir) {
                    Ok(image) => match advance(state.clone(), Event::ImageReady(image)) {
                        Ok(next) => next,
                        Err(e) => state.fail(ErrorCategory::ProviderError, format!("internal: {e}")),
                    },
                    Err(e) => state.fail(ErrorCategory::ProviderError, format!("fixed render: {e}")),
                }
            }
            (StrategyKind::Wot, Stage::AwaitingExecution) => execute(ctx, &dir, state),
            _ => query(ctx, instance, state),
        };
    }
    state
}

/// Runs, scores and archives one instance. The transcript file is in place
/// before the record is returned.
pub fn run_instance(ctx: &RunContext<'_>, instance: &TaskInstance) -> Result<RunRecord, HarnessError> {
    let started_unix_ms = unix_ms();
    let clock = Instant::now();
    let state = run_pipeline(ctx, instance);

    let transcript_path = ctx.run_dir.join(TRANSCRIPTS_DIR).join(format!("{}.json", instance.id));
    write_transcript(&transcript_path, &instance.id, &state.transcript)?;

    let prediction = state.prediction.clone().unwrap_or_default();
    let correct = state.failure.is_none() && instance.score(&prediction);
    let (error_category, error_detail) = match (&state.failure, correct) {
        (Some(f), _) => (Some(f.category), Some(f.detail.clone())),
        (None, false) => (Some(ErrorCategory::NeedsReview), None),
        (None, true) => (None, None),
    };
    Ok(RunRecord {
        run_id: ctx.run_id.to_string(),
        instance_id: instance.id.clone(),
        task: instance.kind,
        group: instance.group.clone(),
        strategy: ctx.strategy.kind,
        prediction,
        target: instance.target.clone(),
        correct,
        error_category,
        error_detail,
        execution_status: state.transcript.execution_status(),
        provider_calls: state.turn(),
        transcript_digest: state.transcript.digest(),
        transcript_path: rel(&transcript_path, &ctx.run_dir),
        image: state.pending_image.as_ref().map(|p| p.image.clone()),
        usage: state.transcript.usage(),
        timing: Timing {
            started_unix_ms,
            finished_unix_ms: unix_ms(),
            wall_seconds: clock.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub total: usize,
    /// Instances with a record from an earlier invocation.
    pub skipped: usize,
    pub new_records: Vec<RunRecord>,
    pub usage: Usage,
    /// Instances that ended in a provider-side failure, across all records.
    pub errored: usize,
}

impl RunSummary {
    /// Process exit code: 0 when every instance has an answer, 2 when some
    /// ended in a provider-side error.
    pub fn exit_code(&self) -> i32 {
        if self.errored > 0 {
            2
        } else {
            0
        }
    }
}

/// Evaluates `instances` under `cfg`, appending one record per instance to
/// `<artifact_root>/<run_id>/records.jsonl` as soon as it finishes.
///
/// Workers (up to `max_concurrency`) hand results to this thread, the only
/// writer. With `resume`, instances that already have a record are skipped;
/// without it an existing non-empty run is refused.
pub fn run_eval(cfg: &RunConfig, instances: &[TaskInstance]) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let client = Client::from_config(&cfg.provider).map_err(|e| HarnessError::Config(e.to_string()))?;
    run_eval_with_client(cfg, instances, &client)
}

/// [`run_eval`] with a caller-supplied client.
pub fn run_eval_with_client(
    cfg: &RunConfig,
    instances: &[TaskInstance],
    client: &Client,
) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let run_dir = cfg.run_dir();
    std::fs::create_dir_all(&run_dir)?;
    let (mut store, existing) = RecordStore::open(&run_dir.join(RECORDS_FILE))?;
    if !existing.is_empty() && !cfg.resume {
        return Err(HarnessError::Config(format!(
            "run `{}` already has {} records; set resume to continue it",
            cfg.run_id,
            existing.len()
        )));
    }
    let config_json = serde_json::to_vec_pretty(cfg).map_err(|e| HarnessError::Io(e.into()))?;
    write_atomic(&run_dir.join(CONFIG_FILE), &config_json)?;

    let done: BTreeSet<&str> = existing.iter().map(|r| r.instance_id.as_str()).collect();
    let pending: Vec<&TaskInstance> = instances.iter().filter(|i| !done.contains(i.id.as_str())).collect();
    let skipped = instances.len() - pending.len();

    let sandbox = (cfg.strategy == StrategyKind::Wot)
        .then(|| Sandbox::new(cfg.runner_command.clone(), cfg.sandbox_timeout(), cfg.max_concurrency));
    let ctx = RunContext {
        run_id: &cfg.run_id,
        strategy: cfg.strategy(),
        profile: cfg.task_profile(),
        client,
        sandbox: sandbox.as_ref(),
        runner_profile: cfg.runner_profile(),
        post_process: cfg.post_process,
        render_margin_px: cfg.render_margin_px,
        run_dir: run_dir.clone(),
    };

    tracing::info!(run_id = %cfg.run_id, pending = pending.len(), skipped, "starting run");
    let next = AtomicUsize::new(0);
    let workers = cfg.max_concurrency.min(pending.len()).max(1);
    let mut new_records = Vec::with_capacity(pending.len());
    let mut write_error = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<Result<RunRecord, HarnessError>>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (ctx, next, pending) = (&ctx, &next, &pending);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(instance) = pending.get(i) else { break };
                if tx.send(run_instance(ctx, instance)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for result in rx {
            let outcome = result.and_then(|record| store.append(&record).map(|_| record));
            match outcome {
                Ok(record) => {
                    tracing::info!(instance = %record.instance_id, correct = record.correct, "record written");
                    new_records.push(record);
                }
                Err(e) => {
                    // Stop handing out work; in-flight instances finish.
                    next.store(usize::MAX / 2, Ordering::Relaxed);
                    write_error.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }

    let errored = existing.iter().chain(&new_records).filter(|r| r.is_errored()).count();
    let usage = new_records.iter().map(|r| r.usage).sum();
    Ok(RunSummary {
        run_id: cfg.run_id.clone(),
        run_dir,
        total: instances.len(),
        skipped,
        new_records,
        usage,
        errored,
    })
}
