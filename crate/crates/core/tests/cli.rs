use std::path::{Path, PathBuf};

use kan_aft::cli::main_with_args;
use kan_aft::diagram::panel_count;
use kan_aft::symbolic::parse_rendered;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["kan-aft"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate(dir: &TempDir, name: &str, truth: &str) -> PathBuf {
    let out = p(dir, name);
    assert_eq!(run(&["simulate", "--truth", truth, "--n", "300", "--seed", "7", "--out", s(&out)]), 0);
    out
}

fn train(dir: &TempDir, data: &Path, name: &str, extra: &[&str]) -> (i32, PathBuf) {
    let out = p(dir, name);
    let mut args = vec!["train", "--data", s(data), "--out", s(&out), "--epochs", "80", "--seed", "3"];
    args.extend_from_slice(extra);
    (run(&args), out)
}

#[test]
fn simulate_is_deterministic_and_records_its_config() {
    let dir = TempDir::new().unwrap();
    let a = p(&dir, "a.csv");
    let b = p(&dir, "b.csv");
    assert_eq!(run(&["simulate", "--n", "1000", "--seed", "7", "--out", s(&a)]), 0);
    assert_eq!(run(&["simulate", "--n", "1000", "--seed", "7", "--out", s(&b)]), 0);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(text.lines().next().unwrap(), "time,event,z1,z2,z3");
    let meta = read_json(&a.with_extension("meta.json"));
    assert_eq!(meta["rows"], 1000);
    assert_eq!(meta["config"]["synthetic"]["seed"], 7);
    assert!(meta["version"].as_str().unwrap().starts_with("kan-aft "));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "x.csv");
    assert_eq!(run(&["simulate", "--truth", "quadratic", "--out", s(&out)]), 2);
    assert_eq!(run(&["simulate", "--n", "10"]), 2);
    assert_eq!(run(&["bogus-command"]), 2);
    let data = simulate(&dir, "d.csv", "linear");
    let out = p(&dir, "m.json");
    assert_eq!(run(&["train", "--data", s(&data), "--out", s(&out), "--epochs", "0"]), 2);
    assert!(!out.exists());
    assert_eq!(train(&dir, &data, "m.json", &["--strategy", "cox"]).0, 2);
}

#[test]
fn train_is_repeatable_and_writes_metrics() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "d.csv", "linear");
    let (code, model_a) = train(&dir, &data, "a.json", &["--strategy", "transform"]);
    assert_eq!(code, 0);
    let (code, _) = train(&dir, &data, "b.json", &["--strategy", "transform"]);
    assert_eq!(code, 0);
    let ma = read_json(&p(&dir, "a.metrics.json"));
    let mb = read_json(&p(&dir, "b.metrics.json"));
    assert_eq!(ma["test"], mb["test"]);
    assert_eq!(ma["train"], mb["train"]);
    assert_eq!(ma["n_train"], 225);
    assert_eq!(ma["n_test"], 75);
    assert_eq!(ma["strategy"], "transform");
    assert!(ma["test"]["c_index"].as_f64().unwrap() > 0.6);
    let model = read_json(&model_a);
    assert_eq!(model["config"]["epochs"], 80);
    assert!(model["version"].is_string());
}

#[test]
fn flags_override_config_file_values() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "d.csv", "linear");
    let cfg = p(&dir, "run.json");
    std::fs::write(&cfg, r#"{"fit": {"strategy": "transform", "epochs": 40, "grid": 4}, "test_fraction": 0.2}"#).unwrap();
    let out = p(&dir, "m.json");
    let metrics = p(&dir, "report.json");
    let code = run(&[
        "train", "--config", s(&cfg), "--data", s(&data), "--strategy", "ipcw",
        "--out", s(&out), "--metrics-out", s(&metrics),
    ]);
    assert_eq!(code, 0);
    let m = read_json(&metrics);
    assert_eq!(m["config"]["fit"]["strategy"], "ipcw");
    assert_eq!(m["config"]["fit"]["epochs"], 40);
    assert_eq!(m["config"]["fit"]["grid"], 4);
    assert_eq!(m["n_test"], 60);

    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(run(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]), 2);
}

#[test]
fn all_censored_data_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let data = p(&dir, "cens.csv");
    let mut text = String::from("time,event,x\n");
    for i in 0..40 {
        text.push_str(&format!("{},0,{}\n", 1.0 + i as f64, i as f64 * 0.1));
    }
    std::fs::write(&data, text).unwrap();
    assert_eq!(train(&dir, &data, "m.json", &["--strategy", "ipcw"]).0, 1);
}

#[test]
fn extract_writes_formula_json_and_text() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "d.csv", "linear");
    let (code, model) = train(&dir, &data, "m.json", &["--strategy", "ipcw"]);
    assert_eq!(code, 0);
    let out = p(&dir, "formula.json");
    assert_eq!(run(&["extract", "--model", s(&model), "--out", s(&out)]), 0);
    let json = read_json(&out);
    assert_eq!(json["formula"]["terms"].as_array().unwrap().len(), 3);
    assert!(json["config"]["fit"].is_object());
    let text = std::fs::read_to_string(out.with_extension("txt")).unwrap();
    let parsed = parse_rendered(text.trim()).unwrap();
    assert_eq!(parsed.terms.len(), 3);
    assert_eq!(text.trim(), json["formula"]["rendered"].as_str().unwrap());
}

#[test]
fn fully_pruned_model_gives_intercept_only_formula_and_bare_diagram() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "d.csv", "linear");
    let (code, model) = train(&dir, &data, "m.json", &["--strategy", "ipcw", "--prune", "1e9"]);
    assert_eq!(code, 0);
    let out = p(&dir, "f.json");
    assert_eq!(run(&["extract", "--model", s(&model), "--out", s(&out)]), 0);
    let parsed = parse_rendered(std::fs::read_to_string(out.with_extension("txt")).unwrap().trim()).unwrap();
    assert!(parsed.terms.is_empty());
    let svg = p(&dir, "net.svg");
    assert_eq!(run(&["diagram", "--model", s(&model), "--out", s(&svg)]), 0);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(panel_count(&text), 0);
    assert_eq!(text.matches("class=\"node\"").count(), 4);
}

#[test]
fn extract_rejects_missing_files_and_deep_models() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "f.json");
    assert_eq!(run(&["extract", "--model", s(&p(&dir, "nope.json")), "--out", s(&out)]), 1);
    let data = simulate(&dir, "d.csv", "linear");
    let cfg = p(&dir, "deep.json");
    std::fs::write(&cfg, r#"{"fit": {"hidden": [2]}}"#).unwrap();
    let model = p(&dir, "deep-model.json");
    let code = run(&[
        "train", "--config", s(&cfg), "--data", s(&data), "--out", s(&model),
        "--strategy", "ipcw", "--epochs", "30",
    ]);
    assert_eq!(code, 0);
    assert_eq!(run(&["extract", "--model", s(&model), "--out", s(&out)]), 1);
    assert!(!out.exists());
}

#[test]
fn diagram_has_one_panel_per_edge_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "d.csv", "nonlinear");
    let (code, model) = train(&dir, &data, "m.json", &["--strategy", "ipcw"]);
    assert_eq!(code, 0);
    let a = p(&dir, "a.svg");
    let b = p(&dir, "b.svg");
    assert_eq!(run(&["diagram", "--model", s(&model), "--out", s(&a)]), 0);
    assert_eq!(run(&["diagram", "--model", s(&model), "--out", s(&b)]), 0);
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert_eq!(panel_count(&text), 3);
    assert!(text.contains("<metadata>"));
    assert!(text.contains("kan-aft "));
}

#[test]
fn evaluate_reports_metrics_for_a_saved_model() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "d.csv", "linear");
    let (code, model) = train(&dir, &data, "m.json", &["--strategy", "ipcw"]);
    assert_eq!(code, 0);
    let out = p(&dir, "eval.json");
    assert_eq!(run(&["evaluate", "--model", s(&model), "--data", s(&data), "--out", s(&out)]), 0);
    let report = read_json(&out);
    assert_eq!(report["report"]["n_uncensored"].as_u64().unwrap() as usize,
        std::fs::read_to_string(&data).unwrap().lines().skip(1).filter(|l| l.split(',').nth(1) == Some("1")).count());
    assert!(report["report"]["c_index"].as_f64().unwrap() > 0.6);
}
