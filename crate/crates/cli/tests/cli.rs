mod common;

use std::path::Path;

use common::{run, run_ok, write_jsonl, SMALL_TEXT};

fn stderr_json(out: &std::process::Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "expected one error line, got {text:?}");
    serde_json::from_str(lines[0]).unwrap()
}

/// LM, human and machine corpora and a trained GLTR detector in `dir`.
fn gltr_fixture(dir: &Path) {
    std::fs::write(dir.join("c.txt"), SMALL_TEXT.repeat(3)).unwrap();
    run_ok(
        dir,
        &[
            "lm", "train", "--corpus", "c.txt", "--order", "3", "--alpha", "0.1", "--out", "lm.bin",
        ],
    );
    let human: Vec<(String, String)> = SMALL_TEXT
        .split(" . ")
        .enumerate()
        .map(|(i, s)| (format!("h{i}"), format!("{s} .")))
        .collect();
    write_jsonl(&dir.join("human.jsonl"), &human);
    run_ok(
        dir,
        &[
            "lm",
            "sample",
            "--lm",
            "lm.bin",
            "--n-docs",
            "8",
            "--length",
            "12",
            "--seed",
            "7",
            "--out",
            "machine.jsonl",
        ],
    );
    run_ok(
        dir,
        &[
            "train",
            "gltr",
            "--lm",
            "lm.bin",
            "--human",
            "human.jsonl",
            "--machine",
            "machine.jsonl",
            "--out",
            "gltr.model",
        ],
    );
    let mut all = std::fs::read_to_string(dir.join("human.jsonl")).unwrap();
    all.push_str(&std::fs::read_to_string(dir.join("machine.jsonl")).unwrap());
    std::fs::write(dir.join("corpus.jsonl"), all).unwrap();
}

#[test]
fn lm_train_writes_model_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), SMALL_TEXT).unwrap();
    run_ok(
        dir.path(),
        &[
            "lm", "train", "--corpus", "c.txt", "--order", "3", "--alpha", "0.1", "--out", "lm.bin",
        ],
    );
    assert!(dir.path().join("lm.bin").metadata().unwrap().len() > 0);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("lm.bin.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "lm train");
    assert_eq!(meta["config"]["order"], 3);
    assert_eq!(meta["config"]["format"], "text");
}

#[test]
fn score_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gltr_fixture(d);
    let score = |out: &str, workers: &str| {
        run_ok(
            d,
            &[
                "score",
                "--detector",
                "gltr.model",
                "--lm",
                "lm.bin",
                "--input",
                "corpus.jsonl",
                "--workers",
                workers,
                "--out",
                out,
            ],
        );
        std::fs::read(d.join(out)).unwrap()
    };
    let a = score("a.csv", "1");
    let b = score("b.csv", "1");
    let c = score("c.csv", "4");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("doc_id,detector_id,score\n"));
    assert_eq!(text.lines().count(), 1 + 8 + SMALL_TEXT.split(" . ").count());
}

#[test]
fn malformed_rating_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("scores.csv"), "doc_id,detector_id,score\nx,g,0.5\n").unwrap();
    std::fs::write(d.join("bad.csv"), "doc_id,rater_id,rating\nx,r1,2\nx,r2,3\n").unwrap();
    let out = run(d, &["eval", "lq", "--scores", "scores.csv", "--ratings", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "input");
    let msg = err["message"].as_str().unwrap();
    assert!(
        msg.contains("bad.csv") && msg.contains("record 3") && msg.contains("\"3\""),
        "{msg}"
    );
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["score", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");

    let out = run(d, &["lm", "train", "--corpus", "missing.txt", "--out", "lm.bin"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["code"], 3);

    std::fs::write(d.join("c.txt"), SMALL_TEXT).unwrap();
    let out = run(
        d,
        &[
            "lm", "sample", "--lm", "c.txt", "--n-docs", "1", "--length", "1", "--out", "s.jsonl",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "a text file is not a model");
    assert!(!d.join("s.jsonl").exists());

    let out = run(
        d,
        &[
            "lm", "sample", "--lm", "c.txt", "--n-docs", "1", "--length", "1", "--top-k", "0", "--out", "s.jsonl",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn aborted_run_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gltr_fixture(d);
    let mut corpus = std::fs::read_to_string(d.join("corpus.jsonl")).unwrap();
    corpus.push_str("{not json\n");
    std::fs::write(d.join("broken.jsonl"), &corpus).unwrap();
    let args = [
        "score",
        "--detector",
        "gltr.model",
        "--lm",
        "lm.bin",
        "--input",
        "broken.jsonl",
        "--out",
        "s.csv",
    ];
    let mut abort = args.to_vec();
    abort.extend(["--on-error", "abort"]);
    let out = run(d, &abort);
    assert_eq!(out.status.code(), Some(3));
    assert!(!d.join("s.csv").exists());
    assert!(!d.join("s.csv.meta.json").exists());

    run_ok(d, &args);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("s.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["stats"]["skipped_errors"], 1);
    assert!(meta["stats"]["first_error"].as_str().unwrap().contains("record"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.txt"), SMALL_TEXT).unwrap();
    std::fs::write(d.join("run.toml"), "corpus = \"c.txt\"\norder = 2\nalpha = 0.5\n").unwrap();
    run_ok(
        d,
        &["--config", "run.toml", "lm", "train", "--order", "4", "--out", "lm.bin"],
    );
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("lm.bin.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["order"], 4);
    assert_eq!(meta["config"]["alpha"], 0.5);
    assert_eq!(meta["config"]["corpus"], "c.txt");

    // List-valued flags replace the configured list rather than extend it.
    std::fs::write(d.join("list.toml"), "bucket_bounds = [5, 50]\n").unwrap();
    gltr_fixture(d);
    run_ok(
        d,
        &[
            "train",
            "gltr",
            "--config",
            "list.toml",
            "--lm",
            "lm.bin",
            "--human",
            "human.jsonl",
            "--machine",
            "machine.jsonl",
            "--bucket-bounds",
            "3",
            "--out",
            "g.model",
        ],
    );
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("g.model.meta.json")).unwrap()).unwrap();
    let bounds = meta["config"]["bucket_bounds"].as_array().unwrap();
    assert_eq!(bounds[0], 3);
    assert_eq!(bounds.len(), 2);
}

#[test]
fn ingest_truncates_and_filters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let docs = vec![
        ("long".to_string(), "x".repeat(12_000)),
        ("short".to_string(), "y".repeat(500)),
        ("tiny".to_string(), "z".repeat(10)),
    ];
    write_jsonl(&d.join("in.jsonl"), &docs);
    run_ok(
        d,
        &[
            "ingest",
            "--input",
            "in.jsonl",
            "--min-chars",
            "100",
            "--out",
            "out.jsonl",
        ],
    );
    let out = common::read_jsonl(&d.join("out.jsonl"));
    assert_eq!(out.len(), 2);
    assert_eq!(out[0]["text"].as_str().unwrap().chars().count(), 10_000);
    assert_eq!(out[0]["full_char_length"], 12_000);
    assert_eq!(out[1]["full_char_length"], 500);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out.jsonl.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["stats"]["filtered_short"], 1);
    assert_eq!(meta["config"]["truncate_at"], 10_000);
}

#[test]
fn accuracy_report_counts_confusion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("s.csv"),
        "doc_id,detector_id,score\na,g,0.9\nb,g,0.2\nc,g,0.7\nd,g,0.5\n",
    )
    .unwrap();
    std::fs::write(d.join("l.csv"), "doc_id,label\na,1\nb,0\nc,0\nd,1\n").unwrap();
    let out = run_ok(d, &["eval", "accuracy", "--scores", "s.csv", "--labels", "l.csv"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["accuracy"], 0.5);
    assert_eq!(report["true_positive"], 1);
    assert_eq!(report["false_positive"], 1);
    assert_eq!(report["false_negative"], 1);
    assert_eq!(report["true_negative"], 1);
}

#[test]
fn duplicate_score_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.csv"), "doc_id,detector_id,score\na,g,0.9\na,g,0.2\n").unwrap();
    std::fs::write(d.join("l.csv"), "doc_id,label\na,1\n").unwrap();
    let out = run(d, &["eval", "accuracy", "--scores", "s.csv", "--labels", "l.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("record 3"));
}
