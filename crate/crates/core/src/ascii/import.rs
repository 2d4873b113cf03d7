use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::{AsciiError, AsciiInstance, AsciiKind, FontCategory};

/// `n` distinct indices out of `len`, chosen by `seed`, in ascending order.
pub fn subsample_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, len, n).into_vec();
    picked.sort_unstable();
    picked
}

struct RawExample<'a> {
    value: &'a Value,
    subtask: Option<String>,
}

fn malformed(msg: impl Into<String>) -> AsciiError {
    AsciiError::MalformedDataset(msg.into())
}

fn collect_examples(root: &Value) -> Result<Vec<RawExample<'_>>, AsciiError> {
    let top_name = root.get("name").and_then(Value::as_str).map(str::to_string);
    let mut out = Vec::new();
    if let Some(examples) = root.get("examples") {
        let examples = examples
            .as_array()
            .ok_or_else(|| malformed("`examples` must be an array"))?;
        out.extend(examples.iter().map(|value| RawExample {
            value,
            subtask: top_name.clone(),
        }));
    }
    if let Some(subtasks) = root.get("subtasks") {
        let subtasks = subtasks
            .as_array()
            .ok_or_else(|| malformed("`subtasks` must be an array"))?;
        for sub in subtasks {
            let name = sub.get("name").and_then(Value::as_str).map(str::to_string);
            let examples = sub
                .get("examples")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("subtask without an `examples` array"))?;
            out.extend(examples.iter().map(|value| RawExample {
                value,
                subtask: name.clone(),
            }));
        }
    }
    if root.get("examples").is_none() && root.get("subtasks").is_none() {
        return Err(malformed("expected `examples` or `subtasks`"));
    }
    Ok(out)
}

fn target_of(example: &Value) -> Result<String, AsciiError> {
    match example.get("target") {
        Some(Value::String(s)) => return Ok(s.clone()),
        Some(Value::Array(items)) => {
            if let Some(Value::String(s)) = items.first() {
                return Ok(s.clone());
            }
            return Err(malformed("`target` array must start with a string"));
        }
        Some(Value::Number(n)) => return Ok(n.to_string()),
        Some(_) => return Err(malformed("unsupported `target` type")),
        None => {}
    }
    // Multiple choice: keep only the best-scoring option, drop the rest.
    let scores = example
        .get("target_scores")
        .and_then(Value::as_object)
        .ok_or_else(|| malformed("example has neither `target` nor `target_scores`"))?;
    let mut best: Option<(&String, f64)> = None;
    for (choice, score) in scores {
        let score = score.as_f64().ok_or_else(|| malformed("non-numeric target score"))?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((choice, score));
        }
    }
    best.map(|(c, _)| c.clone())
        .ok_or_else(|| malformed("empty `target_scores`"))
}

fn font_of(example: &Value) -> Option<FontCategory> {
    ["font_category", "font", "style"]
        .iter()
        .find_map(|key| example.get(*key).and_then(Value::as_str))
        .map(FontCategory::parse_label)
}

/// Reads a BIG-Bench style task file (`examples` or `subtasks`) into
/// instances. Multiple-choice options are dropped in favour of the single
/// correct target; kanji files keep only pronunciation items. Items keep
/// their upstream order; `subsample` = `(n, seed)` picks a reproducible
/// subset.
pub fn import_bigbench(
    path: &Path,
    kind: AsciiKind,
    subsample: Option<(usize, u64)>,
) -> Result<Vec<AsciiInstance>, AsciiError> {
    let text = std::fs::read_to_string(path)?;
    let root: Value = serde_json::from_str(&text).map_err(|e| malformed(format!("{}: {e}", path.display())))?;
    let mut examples = collect_examples(&root)?;

    if kind == AsciiKind::Kanji {
        let total = examples.len();
        examples.retain(|ex| {
            let subtask = ex
                .value
                .get("subtask")
                .and_then(Value::as_str)
                .map(str::to_string)
                .or_else(|| ex.subtask.clone())
                .unwrap_or_default()
                .to_ascii_lowercase();
            !subtask.contains("translation") && !subtask.contains("meaning")
        });
        if total > 0 && examples.is_empty() {
            return Err(AsciiError::UnsupportedSubtask(
                "kanji file contains no pronunciation items".into(),
            ));
        }
    }

    let mut instances = Vec::with_capacity(examples.len());
    for (index, ex) in examples.iter().enumerate() {
        let art = ex
            .value
            .get("input")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(format!("example {index} has no string `input`")))?
            .to_string();
        let mut target = target_of(ex.value)?.trim().to_string();
        if kind == AsciiKind::Mnist {
            let digit: u8 = target
                .parse()
                .ok()
                .filter(|d| *d <= 9)
                .ok_or_else(|| malformed(format!("example {index}: mnist target `{target}` is not a digit")))?;
            target = digit.to_string();
        }
        let font_category = match kind {
            AsciiKind::Word => Some(font_of(ex.value).unwrap_or(FontCategory::Unknown)),
            _ => None,
        };
        let inst = AsciiInstance {
            id: format!("{}-{index:05}", kind.as_str()),
            kind,
            art,
            target,
            font_category,
        };
        inst.validate()?;
        instances.push(inst);
    }

    if let Some((n, seed)) = subsample {
        let keep = subsample_indices(instances.len(), n, seed);
        instances = instances
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep.binary_search(i).is_ok())
            .map(|(_, inst)| inst)
            .collect();
    }
    Ok(instances)
}
