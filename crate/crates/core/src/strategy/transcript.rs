use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{ChatMessage, ContentPart, FinishReason, ImageMime, Role, Usage};
use crate::sandbox::ExecStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PartRecord {
    Text { text: String },
    Image { sha256: String, mime: ImageMime },
}

/// A sent message with image bytes replaced by their digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub role: Role,
    pub parts: Vec<PartRecord>,
}

impl From<&ChatMessage> for MessageRecord {
    fn from(message: &ChatMessage) -> Self {
        Self {
            role: message.role(),
            parts: message
                .parts()
                .iter()
                .map(|part| match part {
                    ContentPart::Text(text) => PartRecord::Text { text: text.clone() },
                    ContentPart::Image(image) => PartRecord::Image {
                        sha256: image.sha256(),
                        mime: image.mime,
                    },
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    /// Path relative to the run directory, when archived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Request {
        turn: u32,
        messages: Vec<MessageRecord>,
    },
    Completion {
        turn: u32,
        text: String,
        finish_reason: FinishReason,
        usage: Usage,
        attempts: u32,
    },
    Script {
        text: String,
    },
    Execution {
        status: ExecStatus,
        images: Vec<ImageRef>,
        stdout: String,
        stderr: String,
        wall_seconds: f64,
    },
    /// The image actually sent back to the model.
    Image {
        image: ImageRef,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn push(&mut self, entry: TranscriptEntry) {
        self.entries.push(entry);
    }

    pub fn completions(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter_map(|e| match e {
            TranscriptEntry::Completion { text, .. } => Some(text.as_str()),
            _ => None,
        })
    }

    pub fn completion_count(&self) -> u32 {
        self.completions().count() as u32
    }

    pub fn usage(&self) -> Usage {
        self.entries
            .iter()
            .filter_map(|e| match e {
                TranscriptEntry::Completion { usage, .. } => Some(*usage),
                _ => None,
            })
            .sum()
    }

    pub fn requests(&self) -> impl Iterator<Item = &[MessageRecord]> {
        self.entries.iter().filter_map(|e| match e {
            TranscriptEntry::Request { messages, .. } => Some(messages.as_slice()),
            _ => None,
        })
    }

    pub fn execution_status(&self) -> Option<ExecStatus> {
        self.entries.iter().rev().find_map(|e| match e {
            TranscriptEntry::Execution { status, .. } => Some(*status),
            _ => None,
        })
    }

    /// Copy with wall-clock fields zeroed, the form used for digests.
    pub fn without_timing(&self) -> Transcript {
        let mut copy = self.clone();
        for entry in &mut copy.entries {
            if let TranscriptEntry::Execution { wall_seconds, .. } = entry {
                *wall_seconds = 0.0;
            }
        }
        copy
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(&self.without_timing()).expect("transcript serializes");
        hex::encode(Sha256::digest(json))
    }
}
