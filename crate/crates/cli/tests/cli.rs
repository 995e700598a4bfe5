use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ontop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ontop"))
        .args(args)
        .output()
        .expect("failed to launch ontop")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn synth(dir: &TempDir, n: usize) -> String {
    let path = dir.path().join("d.csv");
    let p = path.to_str().unwrap();
    let o = ontop(&["synth", "--n", &n.to_string(), "--seed", "1", "--out", p]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    p.to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_writes_all_rows() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 1000);
    let text = fs::read_to_string(data).unwrap();
    assert_eq!(text.lines().count(), 2001 + 1);
    assert!(text.starts_with("x1,x2,y\n"));
}

#[test]
fn train_then_eval() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 200);
    let run = dir.path().join("run");
    let split = ["--split", "0.5,0.25,0.25", "--stratified"];
    let mut args = vec!["train", "--method", "toppush", "--data", &data, "--label", "y", "--pos", "1"];
    args.extend(split);
    args.extend(["--iters", "50", "--out", s(&run)]);
    let o = ontop(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("model.json")).unwrap()).unwrap();
    for key in ["w", "t_final", "spec", "config", "version"] {
        assert!(model.get(key).is_some(), "model.json lacks {key}");
    }
    assert_eq!(fs::read_to_string(run.join("history.csv")).unwrap().lines().count(), 51);

    let report_dir = dir.path().join("eval");
    let model_path = run.join("model.json");
    let mut args = vec!["eval", "--model", s(&model_path), "--data", &data];
    args.extend(split);
    args.extend(["--taus", "0.01,0.03", "--out", s(&report_dir)]);
    let o = ontop(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(report_dir.join("report.json")).unwrap()).unwrap();
    let precision = report["precision"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&precision));
    let criteria = report["criteria"].as_object().unwrap();
    for key in [
        "positives_at_top",
        "positives_at_quantile(0.01)",
        "positives_at_quantile(0.03)",
        "positives_at_np(0.01)",
        "positives_at_np(0.03)",
    ] {
        assert!(criteria.contains_key(key), "missing {key}");
    }
    assert!(report_dir.join("pr_curve.csv").exists());
    assert!(report_dir.join("ptau_curve.csv").exists());
}

#[test]
fn train_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 100);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = ontop(&[
            "train", "--method", "patmat-np", "--tau", "0.1", "--beta", "0.5", "--data", &data, "--iters", "30",
            "--minibatches", "3", "--init", "uniform", "--seed", "4", "--out", s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("model.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 20);
    let out = dir.path().join("x");
    let o = ontop(&["train", "--method", "bogus", "--data", &data, "--out", s(&out)]);
    assert_eq!(code(&o), 2);

    let o = ontop(&["train", "--method", "patmat", "--data", &data, "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--tau") && err.contains("--beta"), "{err}");

    let o = ontop(&["train", "--method", "toppush", "--data", "/nonexistent.csv", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn dimension_mismatch_exits_1() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 20);
    let run = dir.path().join("run");
    let o = ontop(&["train", "--method", "toppush", "--data", &data, "--iters", "5", "--out", s(&run)]);
    assert_eq!(code(&o), 0);
    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "a,b,c,y\n1,2,3,1\n0,1,0,0\n").unwrap();
    let model_path = run.join("model.json");
    let o = ontop(&["eval", "--model", s(&model_path), "--data", s(&wide), "--out", s(&dir.path().join("e"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension"));
}

#[test]
fn one_point_grid() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 100);
    let out = dir.path().join("grid");
    let o = ontop(&[
        "grid", "--data", &data, "--method", "toppush", "--lambdas", "0.001", "--iters", "20", "--stratified",
        "--jobs", "2", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let runs: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(out.join("runs.json")).unwrap()).unwrap();
    assert_eq!(runs.len(), 1);
    assert!(out.join("selected.json").exists());
}

#[test]
fn grid_from_manifest() {
    let dir = TempDir::new().unwrap();
    synth(&dir, 60);
    let manifest = dir.path().join("m.json");
    fs::write(
        &manifest,
        r#"{
            "datasets": [{"name": "synth", "path": "d.csv",
                "split": {"train_frac": 0.5, "valid_frac": 0.25, "test_frac": 0.25, "seed": 0, "stratified": true}}],
            "methods": [{"method": "toppush"}, {"method": "topmean-np", "tau": 0.1}],
            "grid": {"lambdas": [0.0, 0.01]},
            "train": {"iterations": 10},
            "select": ["top"]
        }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = ontop(&["grid", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["runs.json", "selected.json", "rank_table.csv", "zero_audit.csv", "timing.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn reproduce_prints_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    let o = ontop(&["reproduce", "--n", "100000", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("t_measured") && stdout.contains("f_closed"));
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 11);
    let o = ontop(&["reproduce", "--n", "10"]);
    assert_eq!(code(&o), 1);
}
