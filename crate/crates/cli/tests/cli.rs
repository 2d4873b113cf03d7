use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn wot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wot")).args(args).output().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, run_id: &str, strategy: &str, dataset: &str, mock: &str) -> PathBuf {
    let cfg = json!({
        "run_id": run_id,
        "strategy": strategy,
        "task": "word",
        "dataset": fixture(dataset),
        "provider": {"kind": "mock", "fixture_path": fixture(mock)},
        "runner_command": ["sh", fixture("stub_runner.sh")],
        "sandbox_timeout_seconds": 0.5,
        "artifact_root": "runs",
    });
    let path = dir.join(format!("{run_id}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn gen_nav_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        let o = wot(&[
            "gen-nav",
            "--kind",
            "all",
            "--n",
            "5",
            "--steps",
            "3",
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 25);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());

    // One-step grid instances cannot be generated.
    let o = wot(&[
        "gen-nav",
        "--kind",
        "square",
        "--n",
        "1",
        "--steps",
        "1",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn import_data_formats() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("task.json");
    std::fs::write(
        &src,
        json!({"examples": [
            {"input": " _ \n|_|", "target_scores": {"0": 1, "8": 0}},
            {"input": " _ \n _|", "target": "3"},
        ]})
        .to_string(),
    )
    .unwrap();
    let dst = dir.path().join("mnist.jsonl");
    let o = wot(&["import-data", "mnist", src.to_str().unwrap(), dst.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<Value> = std::fs::read_to_string(&dst)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["target"], "0");

    let plain = dir.path().join("plain.jsonl");
    std::fs::write(
        &plain,
        "{\"text\": \"Walk up. What will you find?\", \"target\": [\"apple\"]}\n",
    )
    .unwrap();
    let nav_out = dir.path().join("nav.jsonl");
    let o = wot(&[
        "import-data",
        "hexagon",
        plain.to_str().unwrap(),
        nav_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: Value = serde_json::from_str(std::fs::read_to_string(&nav_out).unwrap().trim()).unwrap();
    assert_eq!(
        (rec["kind"].as_str(), rec["target"].as_str()),
        (Some("hexagon"), Some("apple"))
    );

    let o = wot(&[
        "import-data",
        "navigation",
        plain.to_str().unwrap(),
        nav_out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_report_and_classify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "wot-cli", "wot", "word5.jsonl", "mock_wot.jsonl");
    let o = wot(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("5 instances"));

    let root = dir.path().join("runs");
    let root = root.to_str().unwrap();
    let o = wot(&["report", "--run", "wot-cli", "--compare-paper", "--root", root]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("reference (paper)"));
    assert!(text.contains("80.0 | 66.4"), "{text}");
    assert!(text.contains("sources of error"));

    let o = wot(&["report", "--run", "wot-cli", "--json", "--root", root]);
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["runs"][0]["overall"]["accuracy"], 80.0);
    assert!(summary.get("comparison").is_none());

    let labels = dir.path().join("labels.json");
    std::fs::write(&labels, r#"{"word-03": "visual_perception"}"#).unwrap();
    let o = wot(&[
        "classify-errors",
        "--run",
        "wot-cli",
        "--labels",
        labels.to_str().unwrap(),
        "--root",
        root,
    ]);
    assert!(o.status.success());
    let taxonomy: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(taxonomy["classified"]["word-03"], "visual_perception");
    assert_eq!(taxonomy["worklist"].as_array().unwrap().len(), 0);

    std::fs::write(&labels, r#"{"word-03": "blurry"}"#).unwrap();
    let o = wot(&[
        "classify-errors",
        "--run",
        "wot-cli",
        "--labels",
        labels.to_str().unwrap(),
        "--root",
        root,
    ]);
    assert_eq!(o.status.code(), Some(1));

    // A second run without resume is refused; with resume it is a no-op.
    let o = wot(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let partial = write_config(dir.path(), "faults", "wot", "faults.jsonl", "mock_faults.jsonl");
    assert_eq!(
        wot(&["run", "--config", partial.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let missing = dir.path().join("nope.json");
    assert_eq!(
        wot(&["run", "--config", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );

    let bad_id = write_config(dir.path(), "x", "direct", "word5.jsonl", "mock_direct.jsonl");
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(&bad_id).unwrap()).unwrap();
    cfg["run_id"] = json!("../escape");
    std::fs::write(&bad_id, cfg.to_string()).unwrap();
    assert_eq!(
        wot(&["run", "--config", bad_id.to_str().unwrap()]).status.code(),
        Some(1)
    );

    let root = dir.path().join("runs");
    let o = wot(&["report", "--run", "absent", "--root", root.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ask_prints_transcript_and_answer() {
    let dir = tempfile::tempdir().unwrap();
    let mock = dir.path().join("mock.jsonl");
    std::fs::write(
        &mock,
        [
            json!({"instance_id": "ask", "turn": 0, "text": "```python\nimport turtle\n```"}),
            json!({"instance_id": "ask", "turn": 1, "text": "Answer: a triangle", "image": true}),
        ]
        .map(|v| v.to_string())
        .join("\n"),
    )
    .unwrap();
    let provider = dir.path().join("provider.json");
    std::fs::write(&provider, json!({"kind": "mock", "fixture_path": mock}).to_string()).unwrap();
    let out = dir.path().join("ask");
    let stub = fixture("stub_runner.sh");
    let o = wot(&[
        "ask",
        "--profile",
        "navigation",
        "--provider",
        provider.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--runner",
        "sh",
        stub.to_str().unwrap(),
        "--",
        "Walk forward, turn left, walk forward. What shape is this?",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.trim_end().ends_with("answer: a triangle"), "{text}");
    assert!(text.contains("You write code to create visualizations using the Turtle library"));
    assert!(out.join("artifacts/ask/query.png").is_file());
}

#[test]
fn relative_paths_from_working_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("word5.jsonl"), dir.path().join("data.jsonl")).unwrap();
    std::fs::copy(fixture("mock_wot.jsonl"), dir.path().join("mock.jsonl")).unwrap();
    std::fs::copy(fixture("stub_runner.sh"), dir.path().join("runner.sh")).unwrap();
    let cfg = json!({
        "run_id": "rel",
        "strategy": "wot",
        "task": "word",
        "dataset": "data.jsonl",
        "provider": {"kind": "mock", "fixture_path": "mock.jsonl"},
        "runner_command": ["sh", "runner.sh"],
    });
    std::fs::write(dir.path().join("c.json"), cfg.to_string()).unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_wot"))
            .args(args)
            .current_dir(dir.path())
            .output()
            .unwrap()
    };
    let o = run(&["run", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("4 correct"), "{}", stdout(&o));
    let o = run(&["report", "--run", "rel", "--json"]);
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["runs"][0]["overall"]["n_correct"], 4);
    let record = std::fs::read_to_string(dir.path().join("runs/rel/records.jsonl")).unwrap();
    assert!(
        !record.contains(dir.path().to_str().unwrap()),
        "absolute path leaked into records"
    );
}
