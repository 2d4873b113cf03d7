//! Run orchestration, persistence, aggregation, error taxonomy, and reports.
//!
//! A run directory looks like:
//!
//! ```text
//! <artifact_root>/<run_id>/
//!   config.json
//!   records.jsonl              one RunRecord per line, append-only
//!   transcripts/<id>.json      full message/completion/execution log
//!   artifacts/<id>/            runner output, rendered and sent images
//! ```

mod aggregate;
mod config;
mod record;
pub mod reference;
mod report;
mod run;
mod taxonomy;

use thiserror::Error;

pub use aggregate::{aggregate, percent_1dp, AggregateRow, AggregateTable, GroupKey};
pub use config::{is_safe_id, RunConfig};
pub use record::{
    canonical_by_instance, load_records, write_atomic, write_transcript, RecordStore, RunRecord, Timing, TranscriptFile,
};
pub use report::{
    build_report, compare_with_reference, render_text, run_report, Comparison, ComparisonCell, Report, RunReport,
};
pub use run::{
    load_dataset, run_eval, run_eval_with_client, run_instance, run_pipeline, RunContext, RunSummary, ARTIFACTS_DIR,
    CONFIG_FILE, RECORDS_FILE, TRANSCRIPTS_DIR,
};
pub use taxonomy::{classify_errors, load_labels, parse_labels, ReviewItem, Taxonomy, HUMAN_LABELS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("no records to aggregate")]
    EmptyRecords,
    #[error("unknown label `{label}` for instance {instance_id}; expected poor_visualization or visual_perception")]
    UnknownLabel { instance_id: String, label: String },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code for a run that could not proceed.
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::client::Usage;
    use crate::strategy::StrategyKind;
    use crate::task::TaskKind;

    pub(crate) fn record(id: &str, correct: bool) -> RunRecord {
        RunRecord {
            run_id: "r".into(),
            instance_id: id.into(),
            task: TaskKind::Word,
            group: None,
            strategy: StrategyKind::Direct,
            prediction: "x".into(),
            target: "x".into(),
            correct,
            error_category: None,
            error_detail: None,
            execution_status: None,
            provider_calls: 1,
            transcript_digest: "d".into(),
            transcript_path: format!("transcripts/{id}.json"),
            image: None,
            usage: Usage::default(),
            timing: Timing {
                started_unix_ms: 1,
                finished_unix_ms: 2,
                wall_seconds: 0.5,
            },
        }
    }
}
