//! End-to-end checks of the command line binary: the full pipeline on a
//! synthetic dataset, and the documented exit codes.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cascade-vae"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn pipeline_synth_train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("model");

    let out = run(&[
        "synth", "--nodes", "60", "--m", "2", "--p", "0.15", "--len", "8",
        "--cascades", "30", "--seed", "1", "--out-dir", data.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    for f in ["edges.tsv", "cascades.tsv", "vocab.tsv"] {
        assert!(data.join(f).exists(), "{f} missing");
    }

    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"embed_dim": 8, "hidden_dims": [8], "epochs": 2, "pretrain_epochs": 2}"#,
    )
    .unwrap();
    let out = run(&[
        "train",
        "--graph", data.join("edges.tsv").to_str().unwrap(),
        "--cascades", data.join("cascades.tsv").to_str().unwrap(),
        "--out", model.to_str().unwrap(),
        "--config", cfg.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    for f in ["checkpoint.bin", "manifest.json", "vocab.tsv", "train_log.tsv"] {
        assert!(model.join(f).exists(), "{f} missing");
    }
    let log = std::fs::read_to_string(model.join("train_log.tsv")).unwrap();
    assert!(log.starts_with("epoch\tphase\tloss\tval_map10\twall_secs"));

    let preds = dir.path().join("predictions.tsv");
    let out = run(&[
        "predict",
        "--checkpoint", model.to_str().unwrap(),
        "--cascades", data.join("cascades.tsv").to_str().unwrap(),
        "--seed-pct", "0.5", "--k", "20",
        "--out", preds.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let first = std::fs::read_to_string(&preds).unwrap();
    let first = first.lines().next().expect("at least one prediction line");
    let (_, rest) = first.split_once('\t').expect("cascade_id column");
    assert!(rest.split(';').count() <= 20);
    assert!(rest.starts_with("1,"), "ranks start at 1: {rest}");

    let report = dir.path().join("report.json");
    let out = run(&[
        "evaluate",
        "--checkpoint", model.to_str().unwrap(),
        "--cascades", data.join("cascades.tsv").to_str().unwrap(),
        "--graph", data.join("edges.tsv").to_str().unwrap(),
        "--seed-pct", "0.3,0.5", "--k", "10,50",
        "--report", report.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let blocks = parsed["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 2);
    assert_eq!(blocks[0]["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_input_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--graph", dir.path().join("no_such_edges.tsv").to_str().unwrap(),
        "--cascades", dir.path().join("no_such_cascades.tsv").to_str().unwrap(),
        "--out", dir.path().join("model").to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn unknown_config_key_exits_3_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"embed_dim": 8, "learning_rate_typo": 0.1}"#).unwrap();
    let out = run(&[
        "gradcheck",
        "--config", cfg.to_str().unwrap(),
    ]);
    assert_code(&out, 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("learning_rate_typo"),
        "stderr should name the unknown key: {stderr}"
    );
}

#[test]
fn invalid_config_value_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"embed_dim": 0}"#).unwrap();
    let out = run(&["gradcheck", "--config", cfg.to_str().unwrap()]);
    assert_code(&out, 3);
}

#[test]
fn divergent_training_exits_4_with_last_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = run(&[
        "synth", "--nodes", "40", "--m", "2", "--p", "0.2", "--len", "6",
        "--cascades", "15", "--seed", "3", "--out-dir", data.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"embed_dim": 8, "hidden_dims": [8], "epochs": 2, "pretrain_epochs": 50, "lr": 1e200}"#,
    )
    .unwrap();
    let model = dir.path().join("model");
    let out = run(&[
        "train",
        "--graph", data.join("edges.tsv").to_str().unwrap(),
        "--cascades", data.join("cascades.tsv").to_str().unwrap(),
        "--out", model.to_str().unwrap(),
        "--config", cfg.to_str().unwrap(),
    ]);
    assert_code(&out, 4);
    // the last finite state is still saved for inspection
    assert!(model.join("checkpoint.bin").exists());
    assert!(model.join("manifest.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(model.join("manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["notes"]["aborted"].is_string());
}

#[test]
fn gradcheck_reports_per_tensor_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"embed_dim": 8, "hidden_dims": [8]}"#).unwrap();
    let out = run(&["gradcheck", "--config", cfg.to_str().unwrap()]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("diff.v_s"), "per-tensor lines expected: {stdout}");
    assert!(stdout.contains("max relative error"), "{stdout}");
    assert!(stdout.contains("threshold"), "{stdout}");
}
