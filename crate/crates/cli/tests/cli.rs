use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn oilrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oilrf")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("oilrf-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Shrink the generated config so the chain runs quickly.
fn fast_config(path: &Path, combo: &str) {
    let mut cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    cfg["combo"] = combo.into();
    cfg["model"] = serde_json::json!({
        "mode": "fixed",
        "hyperparameters": { "max_depth": 3, "learning_rate": 0.2, "num_rounds": 20 }
    });
    fs::write(path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

#[test]
fn stages_chain_from_synthetic_sources() {
    let dir = scratch("chain");
    let d = dir.to_str().unwrap();
    ok(&oilrf(&["synth", "--out", d, "--records", "500", "--seed", "4"]));
    for tag in ["TORIS", "Commercial", "Atlas"] {
        assert!(dir.join(format!("{tag}.csv")).exists());
    }
    let config = dir.join("pipeline.json");
    fast_config(&config, "TC");
    let c = config.to_str().unwrap();
    for stage in ["ingest", "preprocess", "tune", "train", "evaluate", "explain"] {
        ok(&oilrf(&[stage, "--config", c]));
    }
    let summary = ok(&oilrf(&["report", "--config", c]));
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[3].starts_with("TC,independent,Atlas,"));
    let run = dir.join("run");
    let importance = fs::read_to_string(run.join("importance.csv")).unwrap();
    assert!(importance.starts_with("feature,class_0,"));
    // stage isolation: a saved model scores a prepared CSV on its own
    let report = ok(&oilrf(&[
        "evaluate",
        "--model",
        run.join("model.json").to_str().unwrap(),
        "--data",
        run.join("test.csv").to_str().unwrap(),
        "--tag",
        "TC",
    ]));
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["role"], "test");
    assert!(report["accuracy"].as_f64().unwrap() >= 0.0);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_without_independent_database() {
    let dir = scratch("tca");
    let d = dir.to_str().unwrap();
    ok(&oilrf(&["synth", "--out", d, "--records", "300"]));
    let config = dir.join("pipeline.json");
    fast_config(&config, "TCA");
    let out = ok(&oilrf(&["run", "--config", config.to_str().unwrap(), "--seed", "2"]));
    assert!(out.contains("TCA,train,") && out.contains("TCA,test,"));
    assert!(!out.contains("independent"));
    let manifest = fs::read_to_string(dir.join("run/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 2"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"combo": "TORIS"}"#).unwrap();
    assert_eq!(oilrf(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(oilrf(&["ingest", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let out = oilrf(&["train", "--out", dir.join("empty").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.csv"));

    let missing = dir.join("sources.json");
    fs::write(&missing, r#"{"combo": "TC", "sources": [
        {"tag": "TORIS", "path": "nope.csv"}, {"tag": "Commercial", "path": "nope.csv"}, {"tag": "Atlas", "path": "nope.csv"}]}"#)
        .unwrap();
    assert_eq!(oilrf(&["ingest", "--config", missing.to_str().unwrap()]).status.code(), Some(3));

    let cfg = dir.join("degenerate.json");
    fs::write(
        &cfg,
        r#"{"combo": "TC", "synth": {"records": 300},
        "model": {"mode": "fixed", "hyperparameters": {"num_class": 1}}}"#,
    )
    .unwrap();
    assert_eq!(oilrf(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    // two classes cannot hold ten RF bins: a training failure
    fs::write(
        &cfg,
        r#"{"combo": "TC", "synth": {"records": 300}, "output_dir": "RUN",
        "model": {"mode": "fixed", "hyperparameters": {"num_class": 2}}}"#
            .replace("RUN", dir.join("r").to_str().unwrap()),
    )
    .unwrap();
    assert_eq!(oilrf(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
    fs::remove_dir_all(&dir).unwrap();
}
