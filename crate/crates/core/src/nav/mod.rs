//! Spatial navigation worlds, the ground-truth walker, and the instance
//! generator.
//!
//! Geometry is generic over the float type; the crate root fixes it to
//! `f64`.

mod generate;
mod geometry;
mod program;
mod render;
mod simulate;
mod world;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::task::{TaskInstance, TaskKind};

pub use generate::{generate_batch, generate_instance, instance_seed, GenConfig, MAX_ATTEMPTS};
pub use geometry::Point;
pub use program::{Direction, NavProgram, Step, Turn};
pub use render::{render_program, RenderStyle, FINAL_QUESTION};
pub use simulate::{displacement_oracle, simulate, trace, StepTrace};
pub use world::{
    build_world, Edge, Node, World, WorldParams, DEFAULT_CIRCLE_LEN, DEFAULT_GRID_SIDE, DEFAULT_TRIANGLE_LEN,
    HEXAGON_LEN, OBJECT_WORDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NavKind {
    Circle,
    Hexagon,
    Triangle,
    Square,
    Rhombus,
}

impl NavKind {
    /// Report column order.
    pub const ALL: [NavKind; 5] = [
        NavKind::Circle,
        NavKind::Hexagon,
        NavKind::Triangle,
        NavKind::Square,
        NavKind::Rhombus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NavKind::Circle => "circle",
            NavKind::Hexagon => "hexagon",
            NavKind::Triangle => "triangle",
            NavKind::Square => "square",
            NavKind::Rhombus => "rhombus",
        }
    }

    pub fn is_grid(self) -> bool {
        matches!(self, NavKind::Square | NavKind::Rhombus)
    }
}

impl std::fmt::Display for NavKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NavKind {
    type Err = NavError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "ring" => Ok(NavKind::Circle),
            other => NavKind::ALL
                .into_iter()
                .find(|k| k.as_str() == other)
                .ok_or_else(|| NavError::Malformed(format!("unknown navigation kind `{s}`"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NavError {
    #[error("invalid world parameters: {0}")]
    InvalidParams(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("step {step} leaves the grid")]
    OffWorld { step: usize },
    #[error("step {step}: {reason}")]
    IllegalStep { step: usize, reason: String },
    #[error("operation does not apply to {0} worlds")]
    UnsupportedKind(NavKind),
    #[error("no answerable {kind} instance after {attempts} attempts")]
    GenerationFailed { kind: NavKind, attempts: usize },
    #[error("instance {id}: target `{expected}` but the walk ends at `{found}`")]
    TargetMismatch {
        id: String,
        expected: String,
        found: String,
    },
    #[error("malformed navigation data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Prompt suffixes for the Turtle visualization profile, in order.
pub fn nav_prompt_suffixes() -> &'static [&'static str] {
    &[
        "Use Python code with Turtle to visualize each step.",
        "All directions are in reference to up at setheading(90).",
        "Name the turtle t; let the step size be 200; mark the final position with a red dot \
         (do not write the final position as text). All other steps may be written as text.",
    ]
}

/// A navigation question. Generated instances carry the structured world
/// and program; imported ones may only have text and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub struct NavInstance<T> {
    pub id: String,
    pub kind: NavKind,
    pub text: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<NavProgram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<World<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Verified,
    /// No structured fields to check against.
    Skipped,
}

impl<T: Float> NavInstance<T> {
    /// Re-runs the walk from the stored world and program.
    pub fn verify(&self) -> Result<Verification, NavError> {
        let (Some(world), Some(program)) = (&self.world, &self.program) else {
            return Ok(Verification::Skipped);
        };
        world.validate()?;
        if world.kind != self.kind {
            return Err(NavError::InvalidWorld(format!(
                "instance kind {} but world kind {}",
                self.kind, world.kind
            )));
        }
        let end = simulate(world, program)?;
        let found = world.label(end).unwrap_or_default();
        if found != self.target {
            return Err(NavError::TargetMismatch {
                id: self.id.clone(),
                expected: self.target.clone(),
                found: found.to_string(),
            });
        }
        Ok(Verification::Verified)
    }

    pub fn to_task(&self) -> TaskInstance {
        TaskInstance {
            id: self.id.clone(),
            kind: TaskKind::Navigation,
            input: self.text.clone(),
            target: self.target.clone(),
            group: Some(self.kind.as_str().to_string()),
        }
    }
}

fn str_field<'a>(record: &'a Value, keys: &[&str]) -> Option<&'a str> {
    keys.iter().find_map(|k| record.get(*k).and_then(Value::as_str))
}

/// Reads navigation JSONL. Full records round-trip; plain `{text, target}`
/// records from other sources are accepted with `default_kind` (or their own
/// `kind`/`structure` field) and no structured fields.
pub fn read_instances<T: Float + DeserializeOwned>(
    path: &Path,
    default_kind: Option<NavKind>,
) -> Result<Vec<NavInstance<T>>, NavError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |m: String| NavError::Malformed(format!("{}:{}: {m}", path.display(), line_no + 1));
        let record: Value = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        if record.get("world").is_some() || record.get("program").is_some() {
            let inst: NavInstance<T> = serde_json::from_value(record).map_err(|e| at(e.to_string()))?;
            out.push(inst);
            continue;
        }
        let text = str_field(&record, &["text", "question", "input"]).ok_or_else(|| at("missing `text`".into()))?;
        let target = match record.get("target").or_else(|| record.get("answer")) {
            Some(Value::String(s)) => s.trim().to_string(),
            Some(Value::Array(items)) => items
                .first()
                .and_then(Value::as_str)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| at("`target` array must start with a string".into()))?,
            _ => return Err(at("missing `target`".into())),
        };
        let kind = match str_field(&record, &["kind", "structure", "shape"]) {
            Some(k) => k.parse().map_err(|e: NavError| at(e.to_string()))?,
            None => default_kind.ok_or_else(|| at("no `kind` and no default kind given".into()))?,
        };
        let id = str_field(&record, &["id"])
            .map(str::to_string)
            .unwrap_or_else(|| format!("{kind}-{:05}", out.len()));
        out.push(NavInstance {
            id,
            kind,
            text: text.to_string(),
            target,
            program: None,
            world: None,
        });
    }
    Ok(out)
}

pub fn write_instances<T: Serialize>(path: &Path, instances: &[NavInstance<T>]) -> Result<(), NavError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for inst in instances {
        let line = serde_json::to_string(inst).map_err(|e| NavError::Malformed(e.to_string()))?;
        writeln!(file, "{line}")?;
    }
    file.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        let s = nav_prompt_suffixes();
        assert_eq!(s.len(), 3);
        assert!(s[0].contains("Turtle"));
        assert!(s[1].contains("setheading(90)"));
        assert!(s[2].contains("red dot"));
        assert!(s[2].contains("step size be 200"));
    }

    #[test]
    fn kind_parsing() {
        for k in NavKind::ALL {
            assert_eq!(k.as_str().parse::<NavKind>().unwrap(), k);
        }
        assert_eq!("Ring".parse::<NavKind>().unwrap(), NavKind::Circle);
        assert!("cube".parse::<NavKind>().is_err());
    }

    #[test]
    fn jsonl_round_trip_and_plain_records() {
        let batch: Vec<NavInstance<f64>> = generate_batch(NavKind::Rhombus, 5, 3, 11, &GenConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nav.jsonl");
        write_instances(&path, &batch).unwrap();
        let back: Vec<NavInstance<f64>> = read_instances(&path, None).unwrap();
        assert_eq!(back, batch);
        for inst in &back {
            assert_eq!(inst.verify().unwrap(), Verification::Verified);
        }

        let plain = dir.path().join("plain.jsonl");
        std::fs::write(
            &plain,
            "{\"text\": \"Walk.\", \"target\": \"lamp\"}\n\n{\"question\": \"Q\", \"answer\": [\"cup\"], \"structure\": \"ring\"}\n",
        )
        .unwrap();
        let got: Vec<NavInstance<f64>> = read_instances(&plain, Some(NavKind::Hexagon)).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].kind, NavKind::Hexagon);
        assert_eq!(got[1].kind, NavKind::Circle);
        assert_eq!(got[1].target, "cup");
        assert_eq!(got[0].verify().unwrap(), Verification::Skipped);
        assert!(read_instances::<f64>(&plain, None).is_err());
    }

    #[test]
    fn tampered_target_is_caught() {
        let mut batch: Vec<NavInstance<f64>> = generate_batch(NavKind::Square, 1, 3, 2, &GenConfig::default()).unwrap();
        batch[0].target = "not-a-label".into();
        assert!(matches!(batch[0].verify(), Err(NavError::TargetMismatch { .. })));
    }

    #[test]
    fn task_conversion() {
        let batch: Vec<NavInstance<f64>> = generate_batch(NavKind::Triangle, 1, 2, 0, &GenConfig::default()).unwrap();
        let task = batch[0].to_task();
        assert_eq!(task.kind, TaskKind::Navigation);
        assert_eq!(task.group.as_deref(), Some("triangle"));
        assert!(task.score(&batch[0].target.to_uppercase()));
    }
}
