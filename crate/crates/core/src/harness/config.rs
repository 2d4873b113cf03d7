use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::client::{ProviderConfig, ProviderKind};
use crate::sandbox::{PostProcessConfig, RunnerProfile, DEFAULT_TIMEOUT};
use crate::strategy::{Strategy, StrategyKind, TaskProfile};
use crate::task::TaskKind;

fn default_concurrency() -> usize {
    1
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

fn default_artifact_root() -> PathBuf {
    PathBuf::from("runs")
}

fn default_margin() -> u32 {
    10
}

/// Everything one evaluation run needs. Loaded from a single JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub strategy: StrategyKind,
    /// Whiteboard only: replay the code turn in the image turn.
    #[serde(default)]
    pub include_history: bool,
    pub task: TaskKind,
    pub dataset: PathBuf,
    /// Evaluate only the first `limit` instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    /// Prompt bundle; the task's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<TaskProfile>,
    pub provider: ProviderConfig,
    #[serde(default)]
    pub post_process: PostProcessConfig,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout")]
    pub sandbox_timeout_seconds: f64,
    /// Runner argument vector; the profile, script path and output dir are
    /// appended. Required for whiteboard runs.
    #[serde(default)]
    pub runner_command: Vec<String>,
    /// Runner profile; plotting for ASCII tasks, turtle for navigation when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runner_profile: Option<RunnerProfile>,
    #[serde(default = "default_artifact_root")]
    pub artifact_root: PathBuf,
    #[serde(default)]
    pub resume: bool,
    /// Fixed-render only: white margin around the rasterized text.
    #[serde(default = "default_margin")]
    pub render_margin_px: u32,
}

/// Accepts ids usable as a single path component on every platform.
pub fn is_safe_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl RunConfig {
    /// Minimal config; callers fill in the rest.
    pub fn new(
        run_id: impl Into<String>,
        strategy: StrategyKind,
        task: TaskKind,
        dataset: impl Into<PathBuf>,
        provider: ProviderConfig,
    ) -> Self {
        Self {
            run_id: run_id.into(),
            strategy,
            include_history: false,
            task,
            dataset: dataset.into(),
            limit: None,
            profile: None,
            provider,
            post_process: PostProcessConfig::default(),
            max_concurrency: default_concurrency(),
            sandbox_timeout_seconds: default_timeout(),
            runner_command: Vec::new(),
            runner_profile: None,
            artifact_root: default_artifact_root(),
            resume: false,
            render_margin_px: default_margin(),
        }
    }

    /// Reads a config file. Relative dataset, fixture, artifact and runner
    /// paths resolve against the file's directory. A runner argument counts
    /// as a path when it contains `/` or names a file next to the config.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let parent = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let base = &std::path::absolute(parent)?;
        cfg.dataset = resolve(base, &cfg.dataset);
        cfg.artifact_root = resolve(base, &cfg.artifact_root);
        if let Some(fixtures) = &cfg.provider.fixture_path {
            cfg.provider.fixture_path = Some(resolve(base, fixtures));
        }
        for arg in &mut cfg.runner_command {
            let path_like = !arg.starts_with('-') && (arg.contains('/') || base.join(arg.as_str()).is_file());
            if path_like {
                *arg = resolve(base, Path::new(arg.as_str())).to_string_lossy().into_owned();
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !is_safe_id(&self.run_id) {
            return bad(format!(
                "run_id `{}` must be 1-128 characters of [A-Za-z0-9._-]",
                self.run_id
            ));
        }
        if self.max_concurrency == 0 {
            return bad("max_concurrency must be at least 1".into());
        }
        if !self.sandbox_timeout_seconds.is_finite() || self.sandbox_timeout_seconds <= 0.0 {
            return bad("sandbox_timeout_seconds must be positive".into());
        }
        if self.strategy == StrategyKind::Wot && self.runner_command.is_empty() {
            return bad("whiteboard runs need runner_command".into());
        }
        if self.include_history && self.strategy != StrategyKind::Wot {
            return bad("include_history applies to the wot strategy only".into());
        }
        self.provider
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.post_process.validate().map_err(HarnessError::Config)?;
        self.task_profile().validate().map_err(HarnessError::Config)?;
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        Strategy {
            kind: self.strategy,
            include_history_in_image_turn: self.include_history,
        }
    }

    pub fn task_profile(&self) -> TaskProfile {
        self.profile.clone().unwrap_or_else(|| self.task.default_profile())
    }

    pub fn runner_profile(&self) -> RunnerProfile {
        self.runner_profile.unwrap_or(if self.task.is_ascii() {
            RunnerProfile::Plotting
        } else {
            RunnerProfile::TurtleGraphics
        })
    }

    pub fn sandbox_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.sandbox_timeout_seconds)
    }

    pub fn run_dir(&self) -> PathBuf {
        self.artifact_root.join(&self.run_id)
    }

    pub fn is_mock(&self) -> bool {
        self.provider.kind == ProviderKind::Mock
    }
}
