//! Host side of script execution.
//!
//! Model-written scripts are never interpreted here. They are written to a
//! fresh work directory and handed to an external runner:
//!
//! ```text
//! runner <profile> <script-file> <out-dir>
//! ```
//!
//! The runner writes `fig_<k>.png` files into `out-dir` and exits with 0
//! (success), 3 (script raised) or 4 (nothing drawn). The host enforces the
//! wall-clock timeout by killing the runner's whole process group.

mod image_ops;

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use image_ops::{
    add_border, decode_image, encode_png, prepare_for_query, prepare_image, resize_max, scaled_dimensions,
    PostProcessConfig, PreparedPayload,
};

use crate::strategy::ImageRef;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const EXIT_OK: i32 = 0;
pub const EXIT_SCRIPT_ERROR: i32 = 3;
pub const EXIT_NO_IMAGE: i32 = 4;

const MAX_CAPTURE_BYTES: usize = 1024 * 1024;
const POLL_INTERVAL: Duration = Duration::from_millis(10);

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("failed to spawn runner `{command}`: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("runner command is empty")]
    EmptyCommand,
    #[error("timeout must be positive")]
    InvalidTimeout,
    #[error("work directory {0} is not empty")]
    WorkDirNotEmpty(PathBuf),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("execution status is {0}, expected ok")]
    Precondition(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunnerProfile {
    Plotting,
    TurtleGraphics,
}

impl RunnerProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            RunnerProfile::Plotting => "plotting",
            RunnerProfile::TurtleGraphics => "turtle_graphics",
        }
    }
}

impl std::str::FromStr for RunnerProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plotting" => Ok(RunnerProfile::Plotting),
            "turtle_graphics" | "turtle" => Ok(RunnerProfile::TurtleGraphics),
            other => Err(format!("unknown runner profile `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    Timeout,
    RuntimeError,
    NoImage,
}

impl ExecStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Ok => "ok",
            ExecStatus::Timeout => "timeout",
            ExecStatus::RuntimeError => "runtime_error",
            ExecStatus::NoImage => "no_image",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterArtifact {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
}

impl RasterArtifact {
    pub fn to_ref(&self) -> ImageRef {
        ImageRef {
            artifact: Some(self.path.to_string_lossy().replace('\\', "/")),
            width: self.width,
            height: self.height,
            sha256: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    /// Non-empty exactly when `status` is `Ok`.
    pub images: Vec<RasterArtifact>,
    pub stdout: String,
    pub stderr: String,
    pub wall_seconds: f64,
}

impl ExecutionResult {
    /// Rewrites image paths relative to `base` (paths outside it are kept).
    pub fn relative_to(&self, base: &Path) -> ExecutionResult {
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        let mut copy = self.clone();
        for image in &mut copy.images {
            if let Ok(rel) = image.path.strip_prefix(&base) {
                image.path = rel.to_path_buf();
            }
        }
        copy
    }
}

#[derive(Debug, Clone)]
pub struct ExecutionRequest {
    pub script: String,
    pub profile: RunnerProfile,
    pub timeout: Duration,
    /// Must not exist yet, or be empty.
    pub work_dir: PathBuf,
    pub runner_command: Vec<String>,
}

/// Runs one script through the external runner. Every failure of the script
/// itself is reported through [`ExecutionResult::status`]; only host-side
/// problems (runner missing, work dir unusable) are errors.
pub fn execute_script(req: &ExecutionRequest) -> Result<ExecutionResult, SandboxError> {
    let (program, base_args) = req.runner_command.split_first().ok_or(SandboxError::EmptyCommand)?;
    if req.timeout.is_zero() {
        return Err(SandboxError::InvalidTimeout);
    }

    // The runner runs inside the work dir, so every path it gets is absolute.
    let work_dir = std::path::absolute(&req.work_dir)?;
    if work_dir.exists() {
        if fs::read_dir(&work_dir)?.next().is_some() {
            return Err(SandboxError::WorkDirNotEmpty(work_dir));
        }
    } else {
        fs::create_dir_all(&work_dir)?;
    }
    let script_path = work_dir.join("script.py");
    let out_dir = work_dir.join("out");
    fs::write(&script_path, &req.script)?;
    fs::create_dir(&out_dir)?;

    let mut command = Command::new(program);
    command
        .args(base_args)
        .arg(req.profile.as_str())
        .arg(&script_path)
        .arg(&out_dir)
        .current_dir(&work_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }

    let start = Instant::now();
    let mut child = command.spawn().map_err(|source| SandboxError::Spawn {
        command: req.runner_command.join(" "),
        source,
    })?;
    let stdout = spawn_reader(child.stdout.take());
    let stderr = spawn_reader(child.stderr.take());

    let (exit, timed_out) = wait_with_timeout(&mut child, req.timeout)?;
    // Reap anything the runner left behind so the pipes close.
    kill_process_group(&child);
    let wall_seconds = start.elapsed().as_secs_f64();

    let stdout = join_reader(stdout);
    let stderr = join_reader(stderr);

    let status = if timed_out {
        ExecStatus::Timeout
    } else {
        match exit.code() {
            Some(EXIT_OK) => ExecStatus::Ok,
            Some(EXIT_NO_IMAGE) => ExecStatus::NoImage,
            _ => ExecStatus::RuntimeError,
        }
    };

    let mut images = Vec::new();
    let status = if status == ExecStatus::Ok {
        images = collect_images(&out_dir)?;
        if images.is_empty() {
            ExecStatus::NoImage
        } else {
            ExecStatus::Ok
        }
    } else {
        status
    };

    Ok(ExecutionResult {
        status,
        images,
        stdout,
        stderr,
        wall_seconds,
    })
}

fn wait_with_timeout(child: &mut Child, timeout: Duration) -> io::Result<(ExitStatus, bool)> {
    let deadline = Instant::now() + timeout;
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok((status, false));
        }
        if Instant::now() >= deadline {
            kill_process_group(child);
            let _ = child.kill();
            let status = child.wait()?;
            return Ok((status, true));
        }
        thread::sleep(POLL_INTERVAL);
    }
}

#[cfg(unix)]
fn kill_process_group(child: &Child) {
    let pgid = child.id() as libc::pid_t;
    // SAFETY: signalling a process group we created; failure (ESRCH) is fine.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_process_group(_child: &Child) {}

fn spawn_reader<R: Read + Send + 'static>(stream: Option<R>) -> Option<thread::JoinHandle<Vec<u8>>> {
    stream.map(|mut reader| {
        thread::spawn(move || {
            let mut captured = Vec::new();
            let mut chunk = [0u8; 8192];
            loop {
                match reader.read(&mut chunk) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => {
                        let room = MAX_CAPTURE_BYTES.saturating_sub(captured.len());
                        captured.extend_from_slice(&chunk[..n.min(room)]);
                    }
                }
            }
            captured
        })
    })
}

fn join_reader(handle: Option<thread::JoinHandle<Vec<u8>>>) -> String {
    handle
        .and_then(|h| h.join().ok())
        .map(|bytes| String::from_utf8_lossy(&bytes).into_owned())
        .unwrap_or_default()
}

fn figure_index(name: &str) -> Option<u64> {
    name.strip_prefix("fig_")?.strip_suffix(".png")?.parse().ok()
}

/// PNG files in `out_dir`: `fig_<k>.png` by `k`, then anything else by name.
fn collect_images(out_dir: &Path) -> Result<Vec<RasterArtifact>, SandboxError> {
    let mut files: Vec<(Option<u64>, String, PathBuf)> = fs::read_dir(out_dir)?
        .filter_map(Result::ok)
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.to_ascii_lowercase()
                .ends_with(".png")
                .then(|| (figure_index(&name), name, e.path()))
        })
        .collect();
    files.sort_by(|a, b| match (a.0, b.0) {
        (Some(x), Some(y)) => x.cmp(&y).then_with(|| a.1.cmp(&b.1)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.1.cmp(&b.1),
    });

    let mut images = Vec::new();
    for (_, _, path) in files {
        match image::image_dimensions(&path) {
            Ok((width, height)) => images.push(RasterArtifact { path, width, height }),
            Err(err) => tracing::warn!(path = %path.display(), %err, "skipping undecodable runner output"),
        }
    }
    Ok(images)
}

/// Counting semaphore capping simultaneous runner processes.
#[derive(Debug)]
struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.freed.wait(available).unwrap();
        }
        *available -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

/// Shared executor: one runner command, one timeout, and a cap on concurrent
/// child processes.
#[derive(Debug)]
pub struct Sandbox {
    runner_command: Vec<String>,
    timeout: Duration,
    permits: Semaphore,
}

impl Sandbox {
    pub fn new(runner_command: Vec<String>, timeout: Duration, max_procs: usize) -> Self {
        Self {
            runner_command,
            timeout,
            permits: Semaphore::new(max_procs),
        }
    }

    pub fn execute(
        &self,
        script: &str,
        profile: RunnerProfile,
        work_dir: &Path,
    ) -> Result<ExecutionResult, SandboxError> {
        let _permit = self.permits.acquire();
        execute_script(&ExecutionRequest {
            script: script.to_string(),
            profile,
            timeout: self.timeout,
            work_dir: work_dir.to_path_buf(),
            runner_command: self.runner_command.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_ordering_is_numeric() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["fig_10.png", "fig_2.png", "extra.png", "notes.txt"] {
            let img = image::RgbImage::from_pixel(4, 3, image::Rgb([0, 0, 0]));
            if name.ends_with(".png") {
                img.save(dir.path().join(name)).unwrap();
            } else {
                fs::write(dir.path().join(name), "x").unwrap();
            }
        }
        let names: Vec<_> = collect_images(dir.path())
            .unwrap()
            .into_iter()
            .map(|a| a.path.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["fig_2.png", "fig_10.png", "extra.png"]);
    }

    #[test]
    fn empty_runner_command() {
        let dir = tempfile::tempdir().unwrap();
        let err = execute_script(&ExecutionRequest {
            script: String::new(),
            profile: RunnerProfile::Plotting,
            timeout: DEFAULT_TIMEOUT,
            work_dir: dir.path().join("w"),
            runner_command: vec![],
        })
        .unwrap_err();
        assert!(matches!(err, SandboxError::EmptyCommand));
    }

    #[test]
    fn missing_runner_is_a_spawn_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = execute_script(&ExecutionRequest {
            script: "x".into(),
            profile: RunnerProfile::Plotting,
            timeout: DEFAULT_TIMEOUT,
            work_dir: dir.path().join("w"),
            runner_command: vec!["/nonexistent/runner-binary".into()],
        })
        .unwrap_err();
        assert!(matches!(err, SandboxError::Spawn { .. }));
    }

    #[test]
    fn semaphore_caps_permits() {
        let sem = Semaphore::new(2);
        let a = sem.acquire();
        let _b = sem.acquire();
        assert_eq!(*sem.available.lock().unwrap(), 0);
        drop(a);
        assert_eq!(*sem.available.lock().unwrap(), 1);
    }
}
