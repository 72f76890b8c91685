use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn calrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calrisk")).args(args).output().expect("binary runs")
}

fn write_logits(path: &Path, n: usize) {
    // deterministic, mildly overconfident logits over 3 classes
    let mut text = String::from("l0,l1,l2,label\n");
    for i in 0..n {
        let a = ((i * 37) % 17) as f64 / 4.0;
        let b = ((i * 11) % 13) as f64 / 5.0;
        let label = (i * 7 + i / 3) % 3;
        text.push_str(&format!("{a},{b},1.0,{label}\n"));
    }
    fs::write(path, text).unwrap();
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn evaluate_bin15_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("logits.csv");
    let out = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    write_logits(&data, 120);
    let o = calrisk(&[
        "evaluate", "--data", path_str(&data), "--mode", "tce", "--families", "bin15", "--seed", "3",
        "--out", path_str(&out), "--emit-csv", path_str(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let families = report["families"].as_array().unwrap();
    assert_eq!(families.len(), 1);
    assert_eq!(families[0]["family"], "bin15");
    assert_eq!(families[0]["best_hyper"], 15.0);
    assert_eq!(families[0]["grid_searched"], false);
    assert_eq!(report["metadata"]["n_test"], 24);
    assert_eq!(report["metadata"]["config"]["seed"], 3);
    assert!(families[0]["validation"]["sqrt_risk_x100"].as_f64().unwrap() >= 0.0);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 5);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("logits.csv");
    write_logits(&data, 90);
    let run = || {
        let o = calrisk(&[
            "evaluate", "--data", path_str(&data), "--mode", "cce", "--families", "kde,kkr,ukkr", "--seed", "5",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let a = run();
    assert_eq!(a, run());
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains("test_risk"));
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "0.1,0.9,0\n0.2,0.8,5\n").unwrap();
    let o = calrisk(&["evaluate", "--data", path_str(&data), "--format", "probs-csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let good = dir.path().join("good.csv");
    write_logits(&good, 60);
    let o = calrisk(&["evaluate", "--data", path_str(&good), "--mode", "cce", "--families", "bin"]);
    assert_eq!(o.status.code(), Some(2));
    let o = calrisk(&["evaluate", "--data", path_str(&good), "--families", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = calrisk(&["evaluate", "--data", path_str(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = calrisk(&["evaluate", "--bogus-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_with_3() {
    // repeated predictions make the Gram matrix singular at lambda = 0
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("dup.csv");
    let mut text = String::new();
    for i in 0..40 {
        text.push_str(&format!("0.2,0.3,0.5,{}\n", i % 3));
    }
    fs::write(&data, text).unwrap();
    let o = calrisk(&[
        "evaluate", "--data", path_str(&data), "--format", "probs-csv", "--mode", "cce", "--families", "ukkr",
        "--grid", "ukkr=0",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ukkr"));
}

#[test]
fn simulate_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let o = calrisk(&["simulate", "--n", "100", "--seeds", "4", "--theta-grid", "0.5,1,2", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,mean_risk,sd,se,argmin_count");
    assert_eq!(lines.len(), 4);
    let counts: usize = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(counts, 4);
}

#[test]
fn simulated_data_selects_unit_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sim.csv");
    let o = calrisk(&[
        "simulate", "--n", "3000", "--seeds", "1", "--seed", "2", "--emit-data", path_str(&data), "--out",
        path_str(&dir.path().join("curve.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = calrisk(&[
        "evaluate", "--data", path_str(&data), "--format", "probs-csv", "--mode", "cce", "--families", "sim",
        "--seed", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let theta = report["families"][0]["best_hyper"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&theta), "selected theta {theta}");
}

#[test]
fn risk_curve_lists_grid() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("logits.csv");
    write_logits(&data, 80);
    let o = calrisk(&[
        "risk-curve", "--data", path_str(&data), "--mode", "cce", "--family", "kkr", "--grid", "0.1,1,10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "hyper,mean_risk,risk_se,sqrt_risk_x100,sqrt_risk_x100_se");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0.1,"));
}
