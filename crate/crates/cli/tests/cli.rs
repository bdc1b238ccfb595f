use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mfextreme"));
    c.env("RUST_LOG", "warn");
    c
}

fn mfx(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mfextreme")
}

fn ok(out: Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn err(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr not json ({e}): {text}"))
}

/// A run small enough to finish in seconds.
fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ok(mfx(&["show-config"]));
    cfg["sea_states"][0]["splits"] = serde_json::json!({"train": 8, "validation": 3, "test": 12});
    cfg["sea_states"][1]["splits"] = serde_json::json!({"train": 0, "validation": 0, "test": 10});
    cfg["waves"]["n_samples"] = serde_json::json!(2000);
    cfg["network"]["hidden_size"] = serde_json::json!(5);
    cfg["network"]["max_epochs"] = serde_json::json!(3);
    let path = dir.join("tiny.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn full_run(config: &Path, out: &Path, seed: &str) {
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    ok(mfx(&["--config", c, "--out", o, "--seed", seed, "--jobs", "2", "generate"]));
    for stage in [
        vec!["analyze-gap"],
        vec!["build-snippets"],
        vec!["train", "--mode", "snippet"],
        vec!["train", "--mode", "base"],
        vec!["evaluate"],
        vec!["report"],
    ] {
        let mut args = vec!["--out", o];
        args.extend(stage);
        ok(mfx(&args));
    }
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn pipeline_is_deterministic_and_writes_documented_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    full_run(&cfg, &a, "7");
    full_run(&cfg, &b, "7");
    for rel in [
        "report.json",
        "eval/ss5/metrics.json",
        "eval/ss6/metrics.json",
        "models/model_snippet.json",
        "snippets/snippets_train.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(rel)).unwrap(),
            std::fs::read(b.join(rel)).unwrap(),
            "{rel} differs"
        );
    }

    assert_eq!(header(&a.join("data/ss5/wave_ss5_0.csv")), "t,eta");
    assert_eq!(header(&a.join("data/ss6/motion_high_ss6_3.csv")), "t,wave,pitch,heave,roll");
    assert_eq!(header(&a.join("data/ss5/motion_low_ss5_3.csv")), "t,wave,pitch,heave,roll");
    assert_eq!(
        header(&a.join("snippets/snippets_validation.csv")),
        "realization_id,center_index,channel,sample_index,value"
    );
    assert!(a.join("snippets/index_train.json").is_file());
    assert!(a.join("gap/maxima_scatter.csv").is_file());
    for m in ["snippet_lstm", "base_lstm", "low_fidelity", "truth"] {
        assert!(a.join(format!("eval/ss5/pdf_{m}.csv")).is_file(), "pdf_{m}");
    }
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("models/model_base.json")).unwrap()).unwrap();
    assert_eq!(model["version"], 1);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["evaluations"].as_array().unwrap().len(), 2);

    let c = tmp.path().join("c");
    full_run(&cfg, &c, "8");
    assert_ne!(
        std::fs::read(a.join("report.json")).unwrap(),
        std::fs::read(c.join("report.json")).unwrap()
    );
}

#[test]
fn tampered_artifact_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("run");
    let o = out.to_str().unwrap();
    ok(mfx(&["--config", cfg.to_str().unwrap(), "--out", o, "generate"]));
    let victim = out.join("data/ss5/motion_low_ss5_2.csv");
    let mut text = std::fs::read_to_string(&victim).unwrap();
    text.push_str("\n");
    std::fs::write(&victim, text).unwrap();
    let e = err(&mfx(&["--out", o, "analyze-gap"]));
    assert_eq!(e["error"], "hash_mismatch");
    assert!(e["message"].as_str().unwrap().contains("motion_low_ss5_2.csv"));
}

#[test]
fn changed_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("run");
    let o = out.to_str().unwrap();
    ok(mfx(&["--config", cfg.to_str().unwrap(), "--out", o, "generate"]));
    let e = err(&mfx(&["--out", o, "--seed", "99", "analyze-gap"]));
    assert_eq!(e["error"], "config_mismatch");
}

#[test]
fn out_of_order_stage_reports_missing_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let o = tmp.path().join("empty");
    let out = mfx(&["--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(err(&out)["error"], "missing_input");
}

#[test]
fn bad_config_and_usage_errors_are_json() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let e = err(&mfx(&["--config", missing.to_str().unwrap(), "generate"]));
    assert_eq!(e["error"], "io");

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"sea_states": [], "surprise": 1}"#).unwrap();
    let e = err(&mfx(&["--config", bad.to_str().unwrap(), "generate"]));
    assert_eq!(e["error"], "config");
    assert!(e["message"].as_str().unwrap().contains("surprise"));

    let mut cfg = ok(mfx(&["show-config"]));
    cfg["snippets"]["window_seconds"] = serde_json::json!(5000.0);
    std::fs::write(&bad, cfg.to_string()).unwrap();
    let e = err(&mfx(&["--config", bad.to_str().unwrap(), "generate"]));
    assert_eq!(e["error"], "config");

    let out = mfx(&["train", "--mode", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(err(&out)["error"], "usage");
}
