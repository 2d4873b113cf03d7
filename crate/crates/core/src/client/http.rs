use std::time::Duration;

use serde_json::{json, Value};

use super::{
    AttemptError, ChatMessage, ClientError, CompletionRequest, CompletionResponse, ContentPart, FinishReason,
    GenerationParams, Provider, ProviderConfig, Usage,
};

/// OpenAI-compatible `/chat/completions` provider.
pub struct HttpProvider {
    endpoint: String,
    model: String,
    credentials_env_var: String,
    http: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ClientError> {
        let base = config
            .base_url
            .as_deref()
            .ok_or_else(|| ClientError::Config("http provider requires base_url".into()))?;
        let credentials_env_var = config
            .credentials_env_var
            .clone()
            .ok_or_else(|| ClientError::Config("http provider requires credentials_env_var".into()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.request_timeout_seconds))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(Self {
            endpoint: format!("{}/chat/completions", base.trim_end_matches('/')),
            model: config.model_name.clone(),
            credentials_env_var,
            http,
        })
    }
}

fn message_json(message: &ChatMessage) -> Value {
    let content = match message.parts() {
        [ContentPart::Text(text)] => Value::String(text.clone()),
        parts => Value::Array(
            parts
                .iter()
                .map(|part| match part {
                    ContentPart::Text(text) => json!({"type": "text", "text": text}),
                    ContentPart::Image(image) => json!({
                        "type": "image_url",
                        "image_url": {"url": image.data_url()},
                    }),
                })
                .collect(),
        ),
    };
    json!({"role": message.role().as_str(), "content": content})
}

/// Request body for an OpenAI-compatible chat-completions call. Greedy
/// requests also pin `seed` so providers that support it decode
/// deterministically.
pub fn build_request_body(model: &str, messages: &[ChatMessage], params: &GenerationParams) -> Value {
    let mut body = json!({
        "model": model,
        "messages": messages.iter().map(message_json).collect::<Vec<_>>(),
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "top_p": params.top_p,
        "frequency_penalty": params.frequency_penalty,
        "presence_penalty": params.presence_penalty,
    });
    if params.is_greedy() {
        body["seed"] = json!(0);
    }
    body
}

pub fn parse_response_body(body: &Value) -> Result<CompletionResponse, ClientError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| ClientError::Transport {
            message: "response has no choices".into(),
            attempts: 1,
        })?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let finish_reason = choice
        .get("finish_reason")
        .and_then(Value::as_str)
        .map(FinishReason::from_wire)
        .unwrap_or(FinishReason::Other);
    let usage = Usage {
        prompt_tokens: body
            .pointer("/usage/prompt_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
        completion_tokens: body
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    Ok(CompletionResponse {
        text,
        finish_reason,
        usage,
    })
}

fn is_content_filter_error(body: &str) -> bool {
    body.contains("content_filter") || body.contains("content_policy_violation")
}

impl Provider for HttpProvider {
    fn attempt(&self, request: &CompletionRequest) -> Result<CompletionResponse, AttemptError> {
        let key = std::env::var(&self.credentials_env_var).map_err(|_| {
            AttemptError::Fatal(ClientError::Auth(format!(
                "environment variable {} is not set",
                self.credentials_env_var
            )))
        })?;
        let body = build_request_body(&self.model, &request.messages, &request.params);
        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| AttemptError::Transient {
                rate_limited: false,
                message: e.to_string(),
            })?;

        let status = response.status();
        let text = response.text().map_err(|e| AttemptError::Transient {
            rate_limited: false,
            message: e.to_string(),
        })?;
        match status.as_u16() {
            200..=299 => {
                let value: Value = serde_json::from_str(&text).map_err(|e| {
                    AttemptError::Fatal(ClientError::Transport {
                        message: format!("malformed response body: {e}"),
                        attempts: 1,
                    })
                })?;
                parse_response_body(&value).map_err(AttemptError::Fatal)
            }
            401 | 403 => Err(AttemptError::Fatal(ClientError::Auth(format!("HTTP {status}: {text}")))),
            429 => Err(AttemptError::Transient {
                rate_limited: true,
                message: format!("HTTP 429: {text}"),
            }),
            400 if is_content_filter_error(&text) => Err(AttemptError::Fatal(ClientError::ContentFiltered)),
            408 | 500..=599 => Err(AttemptError::Transient {
                rate_limited: false,
                message: format!("HTTP {status}: {text}"),
            }),
            _ => Err(AttemptError::Fatal(ClientError::InvalidRequest(format!(
                "HTTP {status}: {text}"
            )))),
        }
    }
}
