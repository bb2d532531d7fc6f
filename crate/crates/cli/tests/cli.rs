use std::process::{Command, Output};

use serde_json::Value;

fn logtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logtree"))
        .args(args)
        .env_remove("LOGTREE_THREADS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = logtree(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn predict_figure1_size() {
    let v = json(&["predict", "--model", "recursive", "--n", "404960"]);
    assert_eq!(v["width_level"], 12);
    for key in ["model", "n", "L_n", "frac", "v", "sigma2", "expected_width", "k_hat", "width_level"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["v"], 1.0);
}

#[test]
fn exact_profile_csv_row() {
    let out = logtree(&["exact-profile", "--model", "recursive", "--n", "4", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,k,value");
    assert_eq!(lines[1], "4,0,1.0");
    assert!(lines[2].starts_with("4,1,1.833333333333"));
    assert_eq!(lines[3], "4,2,1.0");
    assert!(lines[4].starts_with("4,3,0.16666666666666"));
    assert_eq!(lines.len(), 5);
}

#[test]
fn exact_profile_json_is_rational() {
    let v = json(&["exact-profile", "--model", "quad:d=1", "--n", "3"]);
    assert_eq!(v["row"][1], "4/3");
    assert_eq!(v["exact"], true);
}

#[test]
fn oracle_port_three() {
    let v = json(&["oracle", "--model", "port", "--n", "3"]);
    let outcomes = v["outcomes"].as_array().unwrap();
    let find = |p: &[u64]| {
        outcomes
            .iter()
            .find(|o| o["profile"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).eq(p.iter().copied()))
            .map(|o| o["probability"].as_str().unwrap().to_string())
    };
    assert_eq!(find(&[1, 2]).as_deref(), Some("2/3"));
    assert_eq!(find(&[1, 1, 1]).as_deref(), Some("1/3"));
}

#[test]
fn moments_and_series() {
    let v = json(&["exact-moments", "--model", "recursive", "--n", "3", "--m-max", "2"]);
    assert_eq!(v["moments"][2][1], "1/4");
    let s = json(&["series", "--model", "mobile", "--n", "3"]);
    assert_eq!(s["tau"], "2");
    let c = json(&["constants", "--model", "port"]);
    assert_eq!(c["exact"]["sigma2"], "1/2");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(logtree(&["predict", "--model", "nonsense", "--n", "10"]).status.code(), Some(2));
    assert_eq!(logtree(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(logtree(&["constants", "--model", "port", "--format", "csv"]).status.code(), Some(2));
    assert_eq!(logtree(&["figure1", "--n", "1000", "--reps", "10"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_atomically_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hist.csv");
    let p = path.to_str().unwrap();
    let run = |threads: &str| {
        let out = logtree(&[
            "simulate", "--model", "recursive", "--n", "300", "--reps", "50", "--threads", threads, "--format", "csv",
            "-o", p,
        ]);
        assert!(out.status.success());
        std::fs::read_to_string(&path).unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert_eq!(a, b);
    assert!(a.starts_with("value,freq\n"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn gates_reports_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let path = dir.path().join(format!("gates-{threads}.json"));
        let out = logtree(&["gates", "--profile", "quick", "--threads", threads, "-o", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(&path).unwrap()
    };
    assert_eq!(run("1"), run("2"));
}
