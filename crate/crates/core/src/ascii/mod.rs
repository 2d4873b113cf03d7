//! ASCII recognition tasks: MNIST digits, words, and kanji pronunciation.

mod font;
mod import;
mod raster;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use font::GlyphFont;
pub use import::{import_bigbench, subsample_indices};
pub use raster::rasterize_ascii;

use crate::task::{TaskInstance, TaskKind};

#[derive(Debug, Error)]
pub enum AsciiError {
    #[error("malformed dataset: {0}")]
    MalformedDataset(String),
    #[error("unsupported subtask: {0}")]
    UnsupportedSubtask(String),
    #[error("invalid instance {id}: {reason}")]
    InvalidInstance { id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsciiKind {
    Mnist,
    Word,
    Kanji,
}

impl AsciiKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AsciiKind::Mnist => "mnist",
            AsciiKind::Word => "word",
            AsciiKind::Kanji => "kanji",
        }
    }

    pub fn task_kind(self) -> TaskKind {
        match self {
            AsciiKind::Mnist => TaskKind::Mnist,
            AsciiKind::Word => TaskKind::Word,
            AsciiKind::Kanji => TaskKind::Kanji,
        }
    }
}

impl std::str::FromStr for AsciiKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mnist" => Ok(AsciiKind::Mnist),
            "word" => Ok(AsciiKind::Word),
            "kanji" => Ok(AsciiKind::Kanji),
            other => Err(format!("unknown ASCII task kind `{other}`")),
        }
    }
}

/// The five rendering styles of the word recognition task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FontCategory {
    ThreeD,
    Basic,
    Bubble,
    Doh,
    DotMatrix,
    Unknown,
}

impl FontCategory {
    pub const KNOWN: [FontCategory; 5] = [
        FontCategory::ThreeD,
        FontCategory::Basic,
        FontCategory::Bubble,
        FontCategory::Doh,
        FontCategory::DotMatrix,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FontCategory::ThreeD => "three_d",
            FontCategory::Basic => "basic",
            FontCategory::Bubble => "bubble",
            FontCategory::Doh => "doh",
            FontCategory::DotMatrix => "dot_matrix",
            FontCategory::Unknown => "unknown",
        }
    }

    /// Lenient parse of upstream labels ("3D", "dot matrix", ...).
    pub fn parse_label(label: &str) -> FontCategory {
        let norm: String = label
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match norm.as_str() {
            "3d" | "threed" => FontCategory::ThreeD,
            "basic" => FontCategory::Basic,
            "bubble" => FontCategory::Bubble,
            "doh" => FontCategory::Doh,
            "dotmatrix" => FontCategory::DotMatrix,
            _ => FontCategory::Unknown,
        }
    }
}

/// Internal JSONL record for one ASCII item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsciiInstance {
    pub id: String,
    pub kind: AsciiKind,
    pub art: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub font_category: Option<FontCategory>,
}

impl AsciiInstance {
    pub fn validate(&self) -> Result<(), AsciiError> {
        let invalid = |reason: &str| AsciiError::InvalidInstance {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.art.is_empty() {
            return Err(invalid("art is empty"));
        }
        match self.kind {
            AsciiKind::Mnist => {
                let ok = self.target.len() == 1 && self.target.as_bytes()[0].is_ascii_digit();
                if !ok {
                    return Err(invalid("mnist target must be a single digit 0-9"));
                }
            }
            AsciiKind::Word | AsciiKind::Kanji => {
                if self.target.trim().is_empty() {
                    return Err(invalid("target is empty"));
                }
            }
        }
        Ok(())
    }

    pub fn to_task(&self) -> TaskInstance {
        TaskInstance {
            id: self.id.clone(),
            kind: self.kind.task_kind(),
            input: self.art.clone(),
            target: self.target.clone(),
            group: self
                .font_category
                .filter(|c| *c != FontCategory::Unknown)
                .map(|c| c.as_str().to_string()),
        }
    }
}

pub fn read_instances(path: &Path) -> Result<Vec<AsciiInstance>, AsciiError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: AsciiInstance = serde_json::from_str(&line)
            .map_err(|e| AsciiError::MalformedDataset(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        inst.validate()?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_instances(path: &Path, instances: &[AsciiInstance]) -> Result<(), AsciiError> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    for inst in instances {
        serde_json::to_writer(&mut file, inst).expect("instance serializes");
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

/// Appended, in order, to the ASCII art in the whiteboard code turn.
pub fn ascii_prompt_suffixes() -> &'static [&'static str] {
    &[
        "Write Python code with Matplotlib to render the ASCII art as an image.",
        "Let the main figure be called fig with size 6,6.",
        "Ensure each character in the input is considered. Remember colors are matplotlib.colors, and colors must be RGB to be displayed.",
        "Remember not all rows are necessarily the same length.",
    ]
}

/// Digit scoring: the trimmed prediction must parse as a base-10 integer
/// equal to the target; anything unparsable is wrong.
pub fn score_mnist(prediction: &str, target_digit: u8) -> bool {
    prediction
        .trim()
        .parse::<i64>()
        .is_ok_and(|value| value == i64::from(target_digit))
}

/// Case-insensitive exact match after trimming the prediction.
pub fn score_exact_lower(prediction: &str, target: &str) -> bool {
    prediction.trim().to_lowercase() == target.to_lowercase()
}
