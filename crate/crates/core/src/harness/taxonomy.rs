use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunRecord};
use crate::sandbox::ExecStatus;
use crate::task::ErrorCategory;

/// Categories a human reviewer may assign.
pub const HUMAN_LABELS: [ErrorCategory; 2] = [ErrorCategory::PoorVisualization, ErrorCategory::VisualPerception];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub prediction: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    /// Every category, zero counts included.
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub classified: BTreeMap<String, ErrorCategory>,
    /// Incorrect answers over a rendered image still awaiting a label.
    pub worklist: Vec<ReviewItem>,
}

impl Taxonomy {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Parses reviewer labels; only the human categories are accepted.
pub fn parse_labels(raw: &BTreeMap<String, String>) -> Result<BTreeMap<String, ErrorCategory>, HarnessError> {
    raw.iter()
        .map(|(id, label)| {
            let category = label
                .trim()
                .parse::<ErrorCategory>()
                .ok()
                .filter(|c| HUMAN_LABELS.contains(c))
                .ok_or_else(|| HarnessError::UnknownLabel {
                    instance_id: id.clone(),
                    label: label.clone(),
                })?;
            Ok((id.clone(), category))
        })
        .collect()
}

/// Reads labels from a JSON object `{id: label}` or JSONL lines
/// `{"instance_id": .., "label": ..}`.
pub fn load_labels(path: &Path) -> Result<BTreeMap<String, String>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Dataset(format!("{}: {e}", path.display())))?;
    #[derive(Deserialize)]
    struct Line {
        instance_id: String,
        label: String,
    }
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if serde_json::from_str::<Line>(first).is_err() {
        if let Ok(map) = serde_json::from_str::<BTreeMap<String, String>>(&text) {
            return Ok(map);
        }
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str::<Line>(l)
                .map(|line| (line.instance_id, line.label))
                .map_err(|e| HarnessError::Dataset(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn auto_category(record: &RunRecord) -> Option<ErrorCategory> {
    let sandbox_failed = matches!(
        record.execution_status,
        Some(ExecStatus::Timeout | ExecStatus::RuntimeError | ExecStatus::NoImage)
    );
    if sandbox_failed || record.error_category == Some(ErrorCategory::CodeExecution) {
        return Some(ErrorCategory::CodeExecution);
    }
    match record.error_category {
        Some(c @ (ErrorCategory::NoCode | ErrorCategory::ContentFiltered | ErrorCategory::ProviderError)) => Some(c),
        _ => None,
    }
}

/// Sorts every incorrect record into one category.
///
/// Runner failures (timeout, script error, no image) are `code_execution`;
/// missing code and provider-side failures keep their run-time category.
/// Any other wrong answer is `needs_review` until a reviewer label
/// (`poor_visualization` or `visual_perception`) overrides it. Labels for
/// correct or unknown instances are ignored.
pub fn classify_errors(
    records: &[RunRecord],
    human_labels: Option<&BTreeMap<String, String>>,
) -> Result<Taxonomy, HarnessError> {
    let labels = match human_labels {
        Some(raw) => parse_labels(raw)?,
        None => BTreeMap::new(),
    };
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|c| (*c, 0)).collect();
    let mut classified = BTreeMap::new();
    let mut worklist = Vec::new();

    for r in records.iter().filter(|r| !r.correct) {
        let category = match auto_category(r) {
            Some(c) => c,
            None => match labels.get(&r.instance_id) {
                Some(label) => *label,
                None => {
                    worklist.push(ReviewItem {
                        instance_id: r.instance_id.clone(),
                        image: r.image.as_ref().and_then(|i| i.artifact.clone()),
                        prediction: r.prediction.clone(),
                        target: r.target.clone(),
                    });
                    ErrorCategory::NeedsReview
                }
            },
        };
        *counts.entry(category).or_default() += 1;
        classified.insert(r.instance_id.clone(), category);
    }
    Ok(Taxonomy {
        counts,
        classified,
        worklist,
    })
}
