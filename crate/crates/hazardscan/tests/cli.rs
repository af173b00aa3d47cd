//! End-to-end tests of the `hazardscan` binary: generate, run, eval.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hazardscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hazardscan"))
        .args(args)
        .env_remove("HAZARDSCAN_API_KEY")
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Byte-compares two directory trees (flat).
fn assert_identical_trees(a: &Path, b: &Path) {
    let list = |dir: &Path| -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(dir)
            .unwrap()
            .map(|entry| {
                let path = entry.unwrap().path();
                (
                    path.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&path).unwrap(),
                )
            })
            .collect()
    };
    let left = list(a);
    let right = list(b);
    assert_eq!(
        left.keys().collect::<Vec<_>>(),
        right.keys().collect::<Vec<_>>()
    );
    for (name, bytes) in &left {
        assert_eq!(bytes, &right[name], "file {name} differs");
    }
}

#[test]
fn generate_is_bit_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let output = hazardscan(&[
            "generate",
            "--count",
            "25",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    }
    assert_identical_trees(&out_a, &out_b);
}

#[test]
fn generate_count_zero_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let output = hazardscan(&[
        "generate",
        "--count",
        "0",
        "--seed",
        "1",
        "--out",
        tmp.path().join("d").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("--count"));
}

#[test]
fn generate_writes_manifest_listing_every_episode() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("dataset");
    let output = hazardscan(&[
        "generate",
        "--count",
        "40",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let ids = manifest["episode_ids"].as_array().unwrap();
    assert_eq!(ids.len(), 40);
    assert_eq!(manifest["master_seed"], 7);
    for id in ids {
        assert!(out.join(format!("{}.json", id.as_str().unwrap())).is_file());
    }
}

#[test]
fn oracle_run_and_eval_reach_perfect_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("dataset");
    let outcomes = tmp.path().join("outcomes");
    let results = tmp.path().join("results.json");

    let output = hazardscan(&[
        "generate",
        "--count",
        "200",
        "--seed",
        "11",
        "--out",
        dataset.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));

    let output = hazardscan(&[
        "run",
        "--dataset",
        dataset.to_str().unwrap(),
        "--variant",
        "cot-sg-c",
        "--backend",
        "oracle",
        "--concurrency",
        "4",
        "--out",
        outcomes.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    let outcome_files = fs::read_dir(&outcomes)
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name();
            let name = name.to_string_lossy();
            name.starts_with("ep-") && name.ends_with(".json")
        })
        .count();
    assert_eq!(outcome_files, 200);
    assert!(outcomes.join("run_meta.json").is_file());

    let output = hazardscan(&[
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--outcomes",
        outcomes.to_str().unwrap(),
        "--out",
        results.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    let table = stdout(&output);
    assert!(table.contains("Method"), "table missing: {table}");
    assert!(table.contains("100.0"), "expected perfect scores: {table}");

    let results: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&results).unwrap()).unwrap();
    assert_eq!(results["aggregate"]["mean_as"], 1.0);
    assert_eq!(results["aggregate"]["mean_cas"], 1.0);
}

#[test]
fn unknown_variant_lists_the_valid_names() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("dataset");
    hazardscan(&[
        "generate",
        "--count",
        "1",
        "--seed",
        "3",
        "--out",
        dataset.to_str().unwrap(),
    ]);
    let output = hazardscan(&[
        "run",
        "--dataset",
        dataset.to_str().unwrap(),
        "--variant",
        "super-prompt",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    let err = stderr(&output);
    for name in [
        "object-list-ec",
        "scene-description-ec",
        "sg-no-c",
        "e-sg-no-c",
        "sg-c",
        "e-sg-c",
        "cot-sg-c",
    ] {
        assert!(err.contains(name), "missing {name} in: {err}");
    }
}

#[test]
fn llm_backend_without_credential_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("dataset");
    hazardscan(&[
        "generate",
        "--count",
        "1",
        "--seed",
        "3",
        "--out",
        dataset.to_str().unwrap(),
    ]);
    let output = hazardscan(&[
        "run",
        "--dataset",
        dataset.to_str().unwrap(),
        "--variant",
        "cot-sg-c",
        "--backend",
        "llm",
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("HAZARDSCAN_API_KEY"));
}

#[test]
fn eval_of_empty_outcomes_dir_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("dataset");
    let outcomes = tmp.path().join("outcomes");
    fs::create_dir_all(&outcomes).unwrap();
    hazardscan(&[
        "generate",
        "--count",
        "5",
        "--seed",
        "3",
        "--out",
        dataset.to_str().unwrap(),
    ]);
    let output = hazardscan(&[
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--outcomes",
        outcomes.to_str().unwrap(),
        "--out",
        tmp.path().join("results.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 1);
    assert!(stderr(&output).contains("0 episodes evaluated"));
}

#[test]
fn eval_fails_when_too_many_outcomes_are_missing() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("dataset");
    let outcomes = tmp.path().join("outcomes");
    hazardscan(&[
        "generate",
        "--count",
        "20",
        "--seed",
        "13",
        "--out",
        dataset.to_str().unwrap(),
    ]);
    hazardscan(&[
        "run",
        "--dataset",
        dataset.to_str().unwrap(),
        "--variant",
        "sg-c",
        "--out",
        outcomes.to_str().unwrap(),
    ]);
    // Remove a quarter of the outcome files: over the 10% skip budget.
    let mut removed = 0;
    for entry in fs::read_dir(&outcomes).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("ep-") && removed < 5 {
            fs::remove_file(&path).unwrap();
            removed += 1;
        }
    }
    let output = hazardscan(&[
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--outcomes",
        outcomes.to_str().unwrap(),
        "--out",
        tmp.path().join("results.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 1);
    assert!(stderr(&output).contains("skipped"), "stderr: {}", stderr(&output));
    assert!(stderr(&output).contains("more than 10%"));
}

#[test]
fn generate_thousand_episode_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("dataset");
    let output = hazardscan(&[
        "generate",
        "--count",
        "1000",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["episode_ids"].as_array().unwrap().len(), 1000);
    let files = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("ep-")
        })
        .count();
    assert_eq!(files, 1000);
}

/// Minimal scripted HTTP stub for exercising the llm backend through
/// the binary.
fn stub_chat_server(responses: Vec<String>) -> (String, std::thread::JoinHandle<()>) {
    use std::io::{Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        for body in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| {
                            l.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap())
                        })
                        .unwrap_or(0);
                    if buf.len() >= header_end + 4 + content_length {
                        break;
                    }
                }
            }
            let payload = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": body}}]
            })
            .to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                payload.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}"), handle)
}

#[test]
fn llm_run_saves_transcripts_as_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("dataset");
    let outcomes = tmp.path().join("outcomes");
    hazardscan(&[
        "generate",
        "--count",
        "1",
        "--seed",
        "4",
        "--out",
        dataset.to_str().unwrap(),
    ]);

    // Two chat calls per episode: classification, then simplification.
    let (endpoint, handle) = stub_chat_server(vec![
        "everything looks normal to me".to_string(),
        "normal\n".repeat(40),
    ]);
    let config = tmp.path().join("llm.json");
    fs::write(
        &config,
        serde_json::json!({"kind": "llm", "endpoint": endpoint, "model_name": "stub"})
            .to_string(),
    )
    .unwrap();

    let output = Command::new(env!("CARGO_BIN_EXE_hazardscan"))
        .args([
            "run",
            "--dataset",
            dataset.to_str().unwrap(),
            "--variant",
            "cot-sg-c",
            "--config",
            config.to_str().unwrap(),
            "--save-transcripts",
            "--out",
            outcomes.to_str().unwrap(),
        ])
        .env("HAZARDSCAN_API_KEY", "stub-key")
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    handle.join().unwrap();

    let transcript_text = fs::read_to_string(outcomes.join("transcripts.jsonl")).unwrap();
    let lines: Vec<&str> = transcript_text.lines().collect();
    assert_eq!(lines.len(), 2);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["stage"], "classify");
    assert!(first["request"]
        .as_str()
        .unwrap()
        .contains("Classify the following object relations"));
    let second: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(second["stage"], "parse");
}

#[test]
fn noise_config_file_drives_the_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("dataset");
    let outcomes = tmp.path().join("outcomes");
    let config = tmp.path().join("oracle.json");
    fs::write(
        &config,
        r#"{"kind": "oracle", "noise_p": 1.0, "noise_seed": 5}"#,
    )
    .unwrap();
    hazardscan(&[
        "generate",
        "--count",
        "10",
        "--seed",
        "3",
        "--out",
        dataset.to_str().unwrap(),
    ]);
    let output = hazardscan(&[
        "run",
        "--dataset",
        dataset.to_str().unwrap(),
        "--variant",
        "cot-sg-c",
        "--config",
        config.to_str().unwrap(),
        "--out",
        outcomes.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    let output = hazardscan(&[
        "eval",
        "--dataset",
        dataset.to_str().unwrap(),
        "--outcomes",
        outcomes.to_str().unwrap(),
        "--out",
        tmp.path().join("results.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr(&output));
    // With total noise nothing is classified correctly.
    assert!(!stdout(&output).contains("100.0"));
}
