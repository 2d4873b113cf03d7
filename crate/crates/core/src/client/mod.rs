//! Provider-agnostic chat-completion client.
//!
//! [`Client`] wraps a [`Provider`] (OpenAI-compatible HTTP or the
//! fixture-backed mock) with the retry policy, a shared rate limiter, and a
//! usage accumulator. Calls block the caller; the client itself is `Sync` and
//! meant to be shared across worker threads.

mod http;
mod limiter;
mod message;
mod mock;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{build_request_body, parse_response_body, HttpProvider};
pub use limiter::{RateLimiter, RetryPolicy};
pub use message::{prompt_digest, ChatMessage, ContentPart, ImageMime, ImagePayload, Role};
pub use mock::{FixtureEntry, MockProvider};

/// Model used when a config does not name one.
pub const DEFAULT_MODEL: &str = "gpt-4o-2024-05-13";
pub const DEFAULT_REQUEST_TIMEOUT_SECS: f64 = 120.0;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("completion rejected by the provider content filter")]
    ContentFiltered,
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("mock fixture miss for ({instance_id}, turn {turn}): {reason}")]
    MockMiss {
        instance_id: String,
        turn: u32,
        reason: String,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider config: {0}")]
    Config(String),
}

/// Outcome of a single provider attempt, before retry handling.
#[derive(Debug)]
pub enum AttemptError {
    /// Worth retrying: 429, 5xx, timeouts, connection resets.
    Transient { rate_limited: bool, message: String },
    /// Everything else is returned as-is.
    Fatal(ClientError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStage {
    Initial,
    ImageFollowup,
}

/// Generation settings for each query stage: greedy decoding throughout, a
/// short budget and no frequency penalty for the turn that carries the image.
pub fn default_params(stage: QueryStage) -> GenerationParams {
    match stage {
        QueryStage::Initial => GenerationParams {
            temperature: 0.0,
            max_tokens: 2048,
            top_p: 1.0,
            frequency_penalty: 0.05,
            presence_penalty: 0.0,
        },
        QueryStage::ImageFollowup => GenerationParams {
            temperature: 0.0,
            max_tokens: 256,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
        },
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), ClientError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ClientError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(ClientError::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ClientError::InvalidRequest("top_p must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    ContentFilter,
    Other,
}

impl FinishReason {
    pub fn from_wire(value: &str) -> Self {
        match value {
            "stop" => FinishReason::Stop,
            "length" => FinishReason::Length,
            "content_filter" => FinishReason::ContentFilter,
            _ => FinishReason::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl std::ops::Add for Usage {
    type Output = Usage;

    fn add(self, rhs: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for Usage {
    fn sum<I: Iterator<Item = Usage>>(iter: I) -> Usage {
        iter.fold(Usage::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub usage: Usage,
}

/// Lookup key carried alongside a request. The mock provider resolves
/// fixtures by this tag; HTTP providers ignore it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestTag {
    pub instance_id: String,
    pub turn: u32,
}

impl RequestTag {
    pub fn new(instance_id: impl Into<String>, turn: u32) -> Self {
        Self {
            instance_id: instance_id.into(),
            turn,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub params: GenerationParams,
    pub tag: RequestTag,
}

/// Response plus the number of provider attempts it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub response: CompletionResponse,
    pub attempts: u32,
}

pub trait Provider: Send + Sync {
    fn attempt(&self, request: &CompletionRequest) -> Result<CompletionResponse, AttemptError>;
}

/// Injectable sleep so retry and rate-limit waits can be observed in tests.
pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: Option<String>,
    pub model_name: String,
    pub credentials_env_var: Option<String>,
    pub fixture_path: Option<PathBuf>,
    /// Mock only: also require each fixture's `prompt_digest` to match.
    pub strict_digest: bool,
    pub requests_per_minute: Option<u32>,
    pub tokens_per_minute: Option<u64>,
    pub max_attempts: u32,
    pub base_backoff_seconds: f64,
    pub request_timeout_seconds: f64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            base_url: None,
            model_name: DEFAULT_MODEL.to_string(),
            credentials_env_var: None,
            fixture_path: None,
            strict_digest: false,
            requests_per_minute: None,
            tokens_per_minute: None,
            max_attempts: 3,
            base_backoff_seconds: 1.0,
            request_timeout_seconds: DEFAULT_REQUEST_TIMEOUT_SECS,
        }
    }
}

impl ProviderConfig {
    pub fn mock(fixture_path: impl Into<PathBuf>) -> Self {
        Self {
            kind: ProviderKind::Mock,
            fixture_path: Some(fixture_path.into()),
            ..Self::default()
        }
    }

    pub fn http(base_url: impl Into<String>, credentials_env_var: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::Http,
            base_url: Some(base_url.into()),
            credentials_env_var: Some(credentials_env_var.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        match self.kind {
            ProviderKind::Http => {
                if self.base_url.as_deref().is_none_or(str::is_empty) {
                    return Err(ClientError::Config("http provider requires base_url".into()));
                }
                if self.credentials_env_var.as_deref().is_none_or(str::is_empty) {
                    return Err(ClientError::Config("http provider requires credentials_env_var".into()));
                }
            }
            ProviderKind::Mock => {
                if self.fixture_path.is_none() {
                    return Err(ClientError::Config("mock provider requires fixture_path".into()));
                }
            }
        }
        if self.max_attempts == 0 {
            return Err(ClientError::Config("max_attempts must be at least 1".into()));
        }
        if self.base_backoff_seconds.is_nan() || self.base_backoff_seconds < 0.0 {
            return Err(ClientError::Config("base_backoff_seconds must be >= 0".into()));
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts,
            base_backoff: Duration::from_secs_f64(self.base_backoff_seconds),
        }
    }
}

/// Running totals shared by every worker using the same client.
#[derive(Debug, Default)]
pub struct UsageMeter {
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
    calls: AtomicU64,
    attempts: AtomicU64,
}

impl UsageMeter {
    fn record(&self, usage: Usage, attempts: u32) {
        self.prompt_tokens.fetch_add(usage.prompt_tokens, Ordering::Relaxed);
        self.completion_tokens
            .fetch_add(usage.completion_tokens, Ordering::Relaxed);
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.attempts.fetch_add(u64::from(attempts), Ordering::Relaxed);
    }

    pub fn usage(&self) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens.load(Ordering::Relaxed),
            completion_tokens: self.completion_tokens.load(Ordering::Relaxed),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }
}

pub struct Client {
    provider: Box<dyn Provider>,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    sleeper: Arc<dyn Sleeper>,
    meter: UsageMeter,
}

impl std::fmt::Debug for Client {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Client")
            .field("retry", &self.retry)
            .field("meter", &self.meter)
            .finish_non_exhaustive()
    }
}

impl Client {
    pub fn new(provider: Box<dyn Provider>, retry: RetryPolicy) -> Self {
        Self {
            provider,
            retry,
            limiter: None,
            sleeper: Arc::new(ThreadSleeper),
            meter: UsageMeter::default(),
        }
    }

    pub fn from_config(config: &ProviderConfig) -> Result<Self, ClientError> {
        config.validate()?;
        let provider: Box<dyn Provider> = match config.kind {
            ProviderKind::Http => Box::new(HttpProvider::from_config(config)?),
            ProviderKind::Mock => {
                let path = config.fixture_path.as_ref().expect("validated");
                Box::new(MockProvider::load(path)?.strict(config.strict_digest))
            }
        };
        let mut client = Client::new(provider, config.retry_policy());
        if config.requests_per_minute.is_some() || config.tokens_per_minute.is_some() {
            client.limiter = Some(RateLimiter::new(config.requests_per_minute, config.tokens_per_minute));
        }
        Ok(client)
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_rate_limiter(mut self, limiter: RateLimiter) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn meter(&self) -> &UsageMeter {
        &self.meter
    }

    /// Sends one completion request, retrying transient failures with
    /// exponential backoff. A `content_filter` finish reason is surfaced as
    /// [`ClientError::ContentFiltered`] and never retried.
    pub fn complete(&self, request: &CompletionRequest) -> Result<Completion, ClientError> {
        if request.messages.is_empty() {
            return Err(ClientError::InvalidRequest("messages must be nonempty".into()));
        }
        request.params.validate()?;

        let mut attempts = 0u32;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire(u64::from(request.params.max_tokens), self.sleeper.as_ref());
            }
            attempts += 1;
            match self.provider.attempt(request) {
                Ok(response) => {
                    if let Some(limiter) = &self.limiter {
                        limiter.settle(u64::from(request.params.max_tokens), response.usage.total());
                    }
                    self.meter.record(response.usage, attempts);
                    if response.finish_reason == FinishReason::ContentFilter {
                        return Err(ClientError::ContentFiltered);
                    }
                    return Ok(Completion { response, attempts });
                }
                Err(AttemptError::Fatal(err)) => return Err(err),
                Err(AttemptError::Transient { rate_limited, message }) => {
                    if attempts >= self.retry.max_attempts {
                        return Err(if rate_limited {
                            ClientError::RateLimited { attempts }
                        } else {
                            ClientError::Transport { message, attempts }
                        });
                    }
                    tracing::warn!(attempt = attempts, %message, "transient provider failure, retrying");
                    self.sleeper.sleep(self.retry.backoff(attempts));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    #[test]
    fn initial_params() {
        let p = default_params(QueryStage::Initial);
        assert_eq!(p.max_tokens, 2048);
        assert_eq!(p.frequency_penalty, 0.05);
        assert_eq!(p.presence_penalty, 0.0);
        assert_eq!(p.top_p, 1.0);
        assert!(p.is_greedy());
    }

    #[test]
    fn image_followup_params() {
        let p = default_params(QueryStage::ImageFollowup);
        assert_eq!(p.max_tokens, 256);
        assert_eq!(p.frequency_penalty, 0.0);
        assert_eq!(p.temperature, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(ProviderConfig::mock("x.jsonl").validate().is_ok());
        let mut http = ProviderConfig::http("https://example.invalid/v1", "KEY");
        assert!(http.validate().is_ok());
        http.base_url = None;
        assert!(matches!(http.validate(), Err(ClientError::Config(_))));
        let mock = ProviderConfig {
            kind: ProviderKind::Mock,
            ..ProviderConfig::default()
        };
        assert!(mock.validate().is_err());
    }

    struct Scripted {
        failures: Mutex<Vec<AttemptError>>,
        calls: AtomicU64,
        finish: FinishReason,
    }

    impl Provider for Scripted {
        fn attempt(&self, _: &CompletionRequest) -> Result<CompletionResponse, AttemptError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if let Some(err) = self.failures.lock().unwrap().pop() {
                return Err(err);
            }
            Ok(CompletionResponse {
                text: "ok".into(),
                finish_reason: self.finish,
                usage: Usage {
                    prompt_tokens: 3,
                    completion_tokens: 1,
                },
            })
        }
    }

    #[derive(Default)]
    struct Recorder(Mutex<Vec<Duration>>);

    impl Sleeper for Recorder {
        fn sleep(&self, d: Duration) {
            self.0.lock().unwrap().push(d);
        }
    }

    fn request() -> CompletionRequest {
        CompletionRequest {
            messages: vec![ChatMessage::user("hi")],
            params: default_params(QueryStage::Initial),
            tag: RequestTag::new("q1", 0),
        }
    }

    fn transient(rate_limited: bool) -> AttemptError {
        AttemptError::Transient {
            rate_limited,
            message: "boom".into(),
        }
    }

    #[test]
    fn retries_are_capped_and_backoff_grows() {
        let sleeper = Arc::new(Recorder::default());
        let provider = Scripted {
            failures: Mutex::new((0..10).map(|_| transient(true)).collect()),
            calls: AtomicU64::new(0),
            finish: FinishReason::Stop,
        };
        let client = Client::new(
            Box::new(provider),
            RetryPolicy {
                max_attempts: 3,
                base_backoff: Duration::from_secs(1),
            },
        )
        .with_sleeper(sleeper.clone());
        let err = client.complete(&request()).unwrap_err();
        assert!(matches!(err, ClientError::RateLimited { attempts: 3 }));
        let waits = sleeper.0.lock().unwrap().clone();
        assert_eq!(waits, vec![Duration::from_secs(1), Duration::from_secs(2)]);
    }

    #[test]
    fn content_filter_is_not_retried() {
        let provider = Scripted {
            failures: Mutex::new(vec![]),
            calls: AtomicU64::new(0),
            finish: FinishReason::ContentFilter,
        };
        let client =
            Client::new(Box::new(provider), RetryPolicy::default()).with_sleeper(Arc::new(Recorder::default()));
        assert!(matches!(client.complete(&request()), Err(ClientError::ContentFiltered)));
        assert_eq!(client.meter().calls(), 1);
    }

    #[test]
    fn transport_error_after_exhaustion() {
        let provider = Scripted {
            failures: Mutex::new(vec![transient(false), transient(false)]),
            calls: AtomicU64::new(0),
            finish: FinishReason::Stop,
        };
        let client = Client::new(
            Box::new(provider),
            RetryPolicy {
                max_attempts: 2,
                base_backoff: Duration::ZERO,
            },
        )
        .with_sleeper(Arc::new(Recorder::default()));
        assert!(matches!(
            client.complete(&request()),
            Err(ClientError::Transport { attempts: 2, .. })
        ));
    }
}
