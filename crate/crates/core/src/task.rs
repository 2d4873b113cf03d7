//! Task-agnostic benchmark items and scoring dispatch.

use serde::{Deserialize, Serialize};

use crate::ascii::{score_exact_lower, score_mnist};
use crate::strategy::TaskProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Mnist,
    Word,
    Kanji,
    Navigation,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Mnist => "mnist",
            TaskKind::Word => "word",
            TaskKind::Kanji => "kanji",
            TaskKind::Navigation => "navigation",
        }
    }

    pub fn is_ascii(self) -> bool {
        !matches!(self, TaskKind::Navigation)
    }

    pub fn default_profile(self) -> TaskProfile {
        if self.is_ascii() {
            TaskProfile::ascii()
        } else {
            TaskProfile::navigation()
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mnist" => Ok(TaskKind::Mnist),
            "word" => Ok(TaskKind::Word),
            "kanji" => Ok(TaskKind::Kanji),
            "navigation" | "nav" => Ok(TaskKind::Navigation),
            other => Err(format!("unknown task kind `{other}`")),
        }
    }
}

/// One benchmark item as seen by the strategies and the harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub kind: TaskKind,
    pub input: String,
    pub target: String,
    /// Breakdown key: font category for ASCII words, geometry for navigation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl TaskInstance {
    pub fn score(&self, prediction: &str) -> bool {
        match self.kind {
            TaskKind::Mnist => match self.target.trim().parse::<u8>() {
                Ok(digit) if digit <= 9 => score_mnist(prediction, digit),
                _ => false,
            },
            TaskKind::Word | TaskKind::Kanji | TaskKind::Navigation => score_exact_lower(prediction, &self.target),
        }
    }
}

/// Why an instance did not end in a correct answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    NoCode,
    CodeExecution,
    ContentFiltered,
    ProviderError,
    NeedsReview,
    PoorVisualization,
    VisualPerception,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 7] = [
        ErrorCategory::NoCode,
        ErrorCategory::CodeExecution,
        ErrorCategory::ContentFiltered,
        ErrorCategory::ProviderError,
        ErrorCategory::NeedsReview,
        ErrorCategory::PoorVisualization,
        ErrorCategory::VisualPerception,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::NoCode => "no_code",
            ErrorCategory::CodeExecution => "code_execution",
            ErrorCategory::ContentFiltered => "content_filtered",
            ErrorCategory::ProviderError => "provider_error",
            ErrorCategory::NeedsReview => "needs_review",
            ErrorCategory::PoorVisualization => "poor_visualization",
            ErrorCategory::VisualPerception => "visual_perception",
        }
    }
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ErrorCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown error category `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(kind: TaskKind, target: &str) -> TaskInstance {
        TaskInstance {
            id: "x".into(),
            kind,
            input: "art".into(),
            target: target.into(),
            group: None,
        }
    }

    #[test]
    fn dispatches_scorer_by_kind() {
        assert!(inst(TaskKind::Mnist, "7").score(" 7 "));
        assert!(!inst(TaskKind::Mnist, "7").score("seven"));
        assert!(inst(TaskKind::Word, "hello").score("HELLO"));
        assert!(inst(TaskKind::Navigation, "lamp").score("Lamp"));
    }

    #[test]
    fn category_round_trips_through_str() {
        for c in ErrorCategory::ALL {
            assert_eq!(c.as_str().parse::<ErrorCategory>().unwrap(), c);
        }
    }
}
