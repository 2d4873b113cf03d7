use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    prompt_digest, AttemptError, ClientError, CompletionRequest, CompletionResponse, ContentPart, FinishReason,
    Provider, Usage,
};

/// Token estimate charged for each image part when a fixture has no usage.
const IMAGE_TOKEN_ESTIMATE: u64 = 85;

/// One line of a mock fixture file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub instance_id: String,
    pub turn: u32,
    pub text: String,
    #[serde(default = "default_finish")]
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    /// Marks an entry that answers a request carrying an image.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub image: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

fn default_finish() -> FinishReason {
    FinishReason::Stop
}

impl FixtureEntry {
    pub fn new(instance_id: impl Into<String>, turn: u32, text: impl Into<String>) -> Self {
        Self {
            instance_id: instance_id.into(),
            turn,
            text: text.into(),
            finish_reason: FinishReason::Stop,
            prompt_digest: None,
            image: false,
            usage: None,
        }
    }

    pub fn with_image(mut self) -> Self {
        self.image = true;
        self
    }
}

#[derive(Debug, Default)]
struct Injected {
    remaining: u32,
    rate_limited: bool,
}

/// Offline provider answering from a fixture table keyed by
/// `(instance_id, turn)`.
#[derive(Debug, Default)]
pub struct MockProvider {
    entries: HashMap<(String, u32), FixtureEntry>,
    strict: bool,
    injected: Mutex<Injected>,
}

impl MockProvider {
    pub fn from_entries(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| ((e.instance_id.clone(), e.turn), e))
                .collect(),
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClientError::Config(format!("cannot read fixture file {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(line)
                .map_err(|e| ClientError::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Fail the next `count` attempts with a transient error (HTTP 429 when
    /// `rate_limited`).
    pub fn inject_transient(&self, count: u32, rate_limited: bool) {
        let mut injected = self.injected.lock().unwrap();
        injected.remaining = count;
        injected.rate_limited = rate_limited;
    }

    fn miss(request: &CompletionRequest, reason: impl Into<String>) -> AttemptError {
        AttemptError::Fatal(ClientError::MockMiss {
            instance_id: request.tag.instance_id.clone(),
            turn: request.tag.turn,
            reason: reason.into(),
        })
    }
}

fn estimate_usage(request: &CompletionRequest, completion: &str) -> Usage {
    let prompt_tokens = request
        .messages
        .iter()
        .flat_map(|m| m.parts())
        .map(|part| match part {
            ContentPart::Text(t) => t.split_whitespace().count() as u64,
            ContentPart::Image(_) => IMAGE_TOKEN_ESTIMATE,
        })
        .sum();
    Usage {
        prompt_tokens,
        completion_tokens: completion.split_whitespace().count() as u64,
    }
}

impl Provider for MockProvider {
    fn attempt(&self, request: &CompletionRequest) -> Result<CompletionResponse, AttemptError> {
        {
            let mut injected = self.injected.lock().unwrap();
            if injected.remaining > 0 {
                injected.remaining -= 1;
                return Err(AttemptError::Transient {
                    rate_limited: injected.rate_limited,
                    message: "injected failure".into(),
                });
            }
        }

        let key = (request.tag.instance_id.clone(), request.tag.turn);
        let entry = self
            .entries
            .get(&key)
            .ok_or_else(|| Self::miss(request, "no fixture entry"))?;

        let has_image = request.messages.iter().any(|m| m.has_image());
        if has_image && !entry.image {
            return Err(Self::miss(
                request,
                "request carries an image but fixture has no image entry",
            ));
        }
        if !has_image && entry.image {
            return Err(Self::miss(request, "fixture expects an image but request has none"));
        }
        if self.strict {
            let digest = prompt_digest(&request.messages);
            match &entry.prompt_digest {
                Some(expected) if *expected == digest => {}
                Some(expected) => {
                    return Err(Self::miss(
                        request,
                        format!("prompt digest mismatch: expected {expected}, got {digest}"),
                    ))
                }
                None => return Err(Self::miss(request, "strict mode requires prompt_digest")),
            }
        }

        let mut usage = entry.usage.unwrap_or_else(|| estimate_usage(request, &entry.text));
        if entry.finish_reason == FinishReason::Length && entry.usage.is_none() {
            usage.completion_tokens = u64::from(request.params.max_tokens);
        }
        Ok(CompletionResponse {
            text: entry.text.clone(),
            finish_reason: entry.finish_reason,
            usage,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{default_params, ChatMessage, ImagePayload, QueryStage, RequestTag, Role};

    fn request(messages: Vec<ChatMessage>, id: &str, turn: u32) -> CompletionRequest {
        CompletionRequest {
            messages,
            params: default_params(QueryStage::Initial),
            tag: RequestTag::new(id, turn),
        }
    }

    #[test]
    fn answers_by_tag() {
        let mock = MockProvider::from_entries([FixtureEntry::new("q1", 0, "Answer: 7")]);
        let req = request(vec![ChatMessage::system("s"), ChatMessage::user("what?")], "q1", 0);
        let r = mock.attempt(&req).unwrap();
        assert_eq!(r.text, "Answer: 7");
        assert_eq!(r, mock.attempt(&req).unwrap());
    }

    #[test]
    fn image_without_image_entry_misses() {
        let mock = MockProvider::from_entries([FixtureEntry::new("q1", 1, "Answer: 7")]);
        let msg = ChatMessage::new(Role::User, vec![ContentPart::Image(ImagePayload::png(vec![0]))]).unwrap();
        let err = mock.attempt(&request(vec![msg], "q1", 1)).unwrap_err();
        assert!(matches!(err, AttemptError::Fatal(ClientError::MockMiss { .. })));
    }

    #[test]
    fn strict_mode_checks_digest() {
        let messages = vec![ChatMessage::user("hello")];
        let mut entry = FixtureEntry::new("q", 0, "x");
        entry.prompt_digest = Some(prompt_digest(&messages));
        let mock = MockProvider::from_entries([entry]).strict(true);
        assert!(mock.attempt(&request(messages, "q", 0)).is_ok());
        let other = vec![ChatMessage::user("hello there")];
        assert!(mock.attempt(&request(other, "q", 0)).is_err());
    }

    #[test]
    fn length_finish_charges_full_budget() {
        let mut entry = FixtureEntry::new("q", 0, "truncated");
        entry.finish_reason = FinishReason::Length;
        let mock = MockProvider::from_entries([entry]);
        let r = mock.attempt(&request(vec![ChatMessage::user("x")], "q", 0)).unwrap();
        assert_eq!(r.usage.completion_tokens, 2048);
    }
}
