use std::path::Path;
use std::process::{Command, Output};

fn quantlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quantlab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary(dir: &Path, exp: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(exp).join("summary.json")).unwrap()).unwrap()
}

#[test]
fn list_names_every_experiment() {
    let o = quantlab(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "uniform-rate",
        "general-rate",
        "closeness",
        "residual-order",
        "l2-stability",
        "comparison-principle",
        "poincare",
        "hessian",
        "minimizer-quality",
    ] {
        assert!(text.contains(name), "{name} missing from list");
    }
}

#[test]
fn describe_prints_claim_and_schema() {
    let o = quantlab(&["describe", "uniform-rate"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("1/(4N)") && text.contains("endgame.csv") && text.contains("n = [8, 16, 32, 64]"));
    let text = stdout(&quantlab(&["describe", "hessian"]));
    assert!(text.contains("4 eps - 4") && text.contains("counterexample.csv"));
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    assert_eq!(quantlab(&["describe", "unknown"]).status.code(), Some(2));
    assert_eq!(quantlab(&["run", "--experiment", "unknown"]).status.code(), Some(2));
    assert_eq!(quantlab(&["run"]).status.code(), Some(2));
    assert_eq!(quantlab(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn invalid_parameters_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let unsorted = quantlab(&["run", "--experiment", "uniform-rate", "--n", "16,8", "--out", out]);
    assert_eq!(unsorted.status.code(), Some(2));
    let coarse = quantlab(&["run", "--experiment", "residual-order", "--m", "64", "--out", out]);
    assert_eq!(coarse.status.code(), Some(2));
    let band = quantlab(&["run", "--experiment", "hessian", "--eps", "0.7", "--out", out]);
    assert_eq!(band.status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"poincare\"\nunknown_key = 3\n").unwrap();
    assert_eq!(quantlab(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(quantlab(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn config_file_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    std::fs::write(&cfg, format!("experiment = \"poincare\"\nn = [1, 2, 4, 8]\nseed = 3\nout = {:?}\n", out.to_str().unwrap()))
        .unwrap();
    let o = quantlab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out, "poincare");
    assert_eq!(s["experiment"], "poincare");
    assert!(s["paper_anchor"].as_str().unwrap().contains("Poincare"));
    assert!(s["runtime_seconds"].as_f64().unwrap() >= 0.0);
    for a in s["assertions"].as_array().unwrap() {
        assert!(a["name"].is_string() && a["value"].is_number() && a["bound"].is_number());
        assert_eq!(a["pass"], true);
    }
    let table = std::fs::read_to_string(out.join("poincare").join("poincare.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("N,max_ratio,corrected_constant,half_holds_fraction,linear_half_holds"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "experiment = \"poincare\"\nn = [1, 2]\n").unwrap();
    let out = dir.path().join("o");
    let o = quantlab(&["run", cfg.to_str().unwrap(), "--n", "3,5,7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let table = std::fs::read_to_string(out.join("poincare").join("poincare.csv")).unwrap();
    let ns: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["3", "5", "7"]);
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = quantlab(&["run", "--experiment", "hessian", "--deltas", "0.001", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL counterexample_interior_value"));
    let s = summary(dir.path(), "hessian");
    let names: Vec<&str> = s["assertions"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"counterexample_edge_limit"));
    assert!(dir.path().join("hessian").join("counterexample.csv").exists());
}

#[test]
fn identical_seeds_give_identical_tables() {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &runs {
        let o = quantlab(&["run", "--experiment", "general-rate", "--n", "4,8,16", "--seed", "5", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["endgame.csv", "trace_n4.csv", "trace_n8.csv", "trace_n16.csv"] {
        let a = std::fs::read(runs[0].path().join("general-rate").join(name)).unwrap();
        let b = std::fs::read(runs[1].path().join("general-rate").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let other = tempfile::tempdir().unwrap();
    quantlab(&["run", "--experiment", "general-rate", "--n", "4,8,16", "--seed", "6", "--out", other.path().to_str().unwrap()]);
    let a = std::fs::read(runs[0].path().join("general-rate").join("endgame.csv")).unwrap();
    let c = std::fs::read(other.path().join("general-rate").join("endgame.csv")).unwrap();
    assert_ne!(a, c);
}
