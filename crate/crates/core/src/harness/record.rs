use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::client::Usage;
use crate::sandbox::ExecStatus;
use crate::strategy::{ImageRef, StrategyKind, Transcript};
use crate::task::{ErrorCategory, TaskKind};

/// Wall-clock data, the only part of a record that differs between
/// otherwise identical runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub wall_seconds: f64,
}

/// Outcome of one instance in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub instance_id: String,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub strategy: StrategyKind,
    pub prediction: String,
    pub target: String,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_category: Option<ErrorCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution_status: Option<ExecStatus>,
    /// Requests issued, including ones that ended in a provider error.
    pub provider_calls: u32,
    pub transcript_digest: String,
    /// Relative to the run directory.
    pub transcript_path: String,
    /// Image sent back to the model, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    pub usage: Usage,
    pub timing: Timing,
}

impl RunRecord {
    /// Record JSON without the timing block; equal across repeated runs
    /// of the same config with a deterministic provider and runner.
    pub fn canonical_line(&self) -> String {
        let mut value = serde_json::to_value(self).expect("record serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("timing");
        }
        value.to_string()
    }

    /// A record failed before a final answer because of the provider side.
    pub fn is_errored(&self) -> bool {
        matches!(
            self.error_category,
            Some(ErrorCategory::ProviderError | ErrorCategory::ContentFiltered)
        )
    }
}

/// Append-only JSONL file of records, one complete line per record.
#[derive(Debug)]
pub struct RecordStore {
    path: PathBuf,
    file: File,
}

impl RecordStore {
    /// Opens (creating if needed) and repairs the store: a torn final line
    /// from an interrupted write is cut off. Returns the intact records.
    pub fn open(path: &Path) -> Result<(Self, Vec<RunRecord>), HarnessError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let mut records = Vec::new();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        while offset < bytes.len() {
            let Some(nl) = bytes[offset..].iter().position(|b| *b == b'\n') else {
                break;
            };
            let line = &bytes[offset..offset + nl];
            if !line.iter().all(u8::is_ascii_whitespace) {
                match serde_json::from_slice::<RunRecord>(line) {
                    Ok(r) => records.push(r),
                    Err(e) => {
                        return Err(HarnessError::Dataset(format!(
                            "{}: corrupt record at byte {offset}: {e}",
                            path.display()
                        )))
                    }
                }
            }
            offset += nl + 1;
            good_len = offset;
        }
        if good_len < bytes.len() {
            tracing::warn!(
                path = %path.display(),
                dropped = bytes.len() - good_len,
                "truncating torn record line"
            );
            file.set_len(good_len as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one record as a single line and syncs it to disk.
    pub fn append(&mut self, record: &RunRecord) -> Result<(), HarnessError> {
        let mut line = serde_json::to_vec(record).map_err(|e| HarnessError::Io(e.into()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub fn load_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Dataset(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Dataset(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so
/// readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_data()?;
    tmp.persist(path).map_err(|e| HarnessError::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptFile {
    pub instance_id: String,
    pub transcript: Transcript,
}

pub fn write_transcript(path: &Path, instance_id: &str, transcript: &Transcript) -> Result<(), HarnessError> {
    let file = TranscriptFile {
        instance_id: instance_id.to_string(),
        transcript: transcript.clone(),
    };
    let bytes = serde_json::to_vec_pretty(&file).map_err(|e| HarnessError::Io(e.into()))?;
    write_atomic(path, &bytes)
}

/// Canonical lines keyed by instance id; order-independent comparison of
/// two runs.
pub fn canonical_by_instance(records: &[RunRecord]) -> BTreeMap<String, String> {
    records
        .iter()
        .map(|r| (r.instance_id.clone(), r.canonical_line()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::test_support::record;

    #[test]
    fn append_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let (mut store, existing) = RecordStore::open(&path).unwrap();
        assert!(existing.is_empty());
        store.append(&record("a", true)).unwrap();
        store.append(&record("b", false)).unwrap();
        drop(store);
        let (_, existing) = RecordStore::open(&path).unwrap();
        assert_eq!(existing, vec![record("a", true), record("b", false)]);
    }

    #[test]
    fn torn_line_is_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let full = serde_json::to_string(&record("a", true)).unwrap();
        std::fs::write(&path, format!("{full}\n{}", &full[..full.len() / 2])).unwrap();
        let (mut store, existing) = RecordStore::open(&path).unwrap();
        assert_eq!(existing.len(), 1);
        store.append(&record("b", true)).unwrap();
        drop(store);
        let records = load_records(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].instance_id, "b");
    }

    #[test]
    fn canonical_ignores_timing() {
        let a = record("a", true);
        let mut b = a.clone();
        b.timing.wall_seconds = 9.0;
        assert_eq!(a.canonical_line(), b.canonical_line());
        assert!(!a.canonical_line().contains("timing"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("t.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
