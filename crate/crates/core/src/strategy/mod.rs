//! Prompting strategies: prompt assembly, code and answer extraction, and the
//! per-instance pipeline state machine.

mod extract;
mod pipeline;
pub mod prompts;
mod transcript;

use serde::{Deserialize, Serialize};

pub use extract::{extract_code, extract_final_answer};
pub use pipeline::{advance, build_messages, Event, Failure, PipelineError, PipelineState, PreparedImage, Stage};
pub use transcript::{ImageRef, MessageRecord, PartRecord, Transcript, TranscriptEntry};

use crate::ascii::ascii_prompt_suffixes;
use crate::nav::nav_prompt_suffixes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Direct,
    Cot,
    Wot,
    /// Render the query text straight to an image and ask about it.
    FixedRender,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Direct => "direct",
            StrategyKind::Cot => "cot",
            StrategyKind::Wot => "wot",
            StrategyKind::FixedRender => "fixed_render",
        }
    }

    /// Provider calls a successful run makes.
    pub fn expected_calls(self) -> u32 {
        match self {
            StrategyKind::Direct | StrategyKind::FixedRender => 1,
            StrategyKind::Cot | StrategyKind::Wot => 2,
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(StrategyKind::Direct),
            "cot" => Ok(StrategyKind::Cot),
            "wot" => Ok(StrategyKind::Wot),
            "fixed_render" => Ok(StrategyKind::FixedRender),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    /// Whiteboard only: replay the code turn before the image turn.
    #[serde(default)]
    pub include_history_in_image_turn: bool,
}

impl Strategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            include_history_in_image_turn: false,
        }
    }

    pub fn wot_with_history() -> Self {
        Self {
            kind: StrategyKind::Wot,
            include_history_in_image_turn: true,
        }
    }
}

/// Per-task prompt bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub viz_tool_name: String,
    #[serde(default = "default_fence_tag")]
    pub fence_tag: String,
    #[serde(default)]
    pub user_prompt_suffixes: Vec<String>,
    #[serde(default = "default_marker")]
    pub answer_marker: String,
}

fn default_fence_tag() -> String {
    "python".to_string()
}

fn default_marker() -> String {
    prompts::DEFAULT_ANSWER_MARKER.to_string()
}

impl TaskProfile {
    pub fn ascii() -> Self {
        Self {
            viz_tool_name: "Matplotlib".into(),
            fence_tag: default_fence_tag(),
            user_prompt_suffixes: ascii_prompt_suffixes().iter().map(|s| s.to_string()).collect(),
            answer_marker: default_marker(),
        }
    }

    pub fn navigation() -> Self {
        Self {
            viz_tool_name: "Turtle".into(),
            fence_tag: default_fence_tag(),
            user_prompt_suffixes: nav_prompt_suffixes().iter().map(|s| s.to_string()).collect(),
            answer_marker: default_marker(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.viz_tool_name.trim().is_empty() {
            return Err("viz_tool_name must be nonempty".into());
        }
        if self.fence_tag.trim().is_empty() {
            return Err("fence_tag must be nonempty".into());
        }
        Ok(())
    }
}
