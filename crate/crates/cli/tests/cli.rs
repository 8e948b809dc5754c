use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

fn nvlaser(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvlaser"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> HashMap<String, String> {
    let out = nvlaser(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let line = stdout.lines().last().expect("summary line");
    line.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = read_csv(path);
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.into_iter().map(|r| r[k].clone()).collect()
}

fn max_of(values: &[String]) -> String {
    values
        .iter()
        .max_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()))
        .unwrap()
        .clone()
}

#[test]
fn contrast_map_d3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let s = ok(&["contrast-map", "--scenario", "D3", "--rabi", "1e4:1e7:16:log", "--intensity", "1e2:1e8:24:log", "--out", out.to_str().unwrap()]);
    let c = column(&out, "contrast");
    assert_eq!(c.len(), 16 * 24);
    assert_eq!(s["max_contrast"], max_of(&c));
    let max: f64 = s["max_contrast"].parse().unwrap();
    assert!((max / 0.22e-2 - 1.0).abs() <= 0.25, "max contrast {max}");
}

#[test]
fn odmr_d3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("odmr.csv");
    let s = ok(&["odmr", "--scenario", "D3", "--a", "1e-20", "--gamma", "0.02", "--out", out.to_str().unwrap()]);
    let p = column(&out, "power_w");
    assert_eq!(p.len(), 1001);
    assert_eq!(s["peak_power"], max_of(&p));
    let i_off: f64 = s["i_th_off"].parse().unwrap();
    let i_on: f64 = s["i_th_on"].parse().unwrap();
    assert!(i_on < i_off);
    let ith = column(&out, "threshold_current_a");
    assert!(max_of(&ith).parse::<f64>().unwrap() <= i_off);
}

#[test]
fn odmr_json_is_schema_versioned() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("odmr.json");
    ok(&["odmr", "--scenario", "D3", "--format", "json", "--out", out.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["kind"], "odmr");
    assert_eq!(v["data"]["power_w"].as_array().unwrap().len(), 1001);
}

#[test]
fn threshold_map_and_regions_agree() {
    let dir = tempfile::tempdir().unwrap();
    let tm = dir.path().join("t.csv");
    let rg = dir.path().join("r.csv");
    let grid = ["--a-grid", "1e-22:1e-19:7:log", "--gamma-grid", "0.01:0.1:4"];
    let s1 = ok(&[&["threshold-map", "--out", tm.to_str().unwrap()][..], &grid].concat());
    let s2 = ok(&[&["regions", "--out", rg.to_str().unwrap()][..], &grid].concat());
    assert_eq!(column(&tm, "i_th_off_a"), column(&rg, "i_th_off_a"));
    assert_eq!(s1["contrast"], s2["contrast"]);
    let regions = column(&rg, "region");
    let count = |l: &str| regions.iter().filter(|r| *r == l).count().to_string();
    assert_eq!(s2["A"], count("A"));
    assert_eq!(s2["B"], count("B"));
    assert_eq!(s2["C"], count("C"));
    let min = column(&tm, "i_th_off_a")
        .iter()
        .min_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()))
        .unwrap()
        .clone();
    assert_eq!(s1["min_i_th_off"], min);
}

#[test]
fn sensitivity_reports_each_noise_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let s = ok(&["sensitivity", "--scenario", "D3", "--out", out.to_str().unwrap()]);
    let noise = column(&out, "noise");
    let sens = column(&out, "sensitivity_t");
    assert_eq!(noise, ["optical-shot", "current-shot"]);
    assert_eq!(s["optical-shot"], sens[0]);
    assert_eq!(s["current-shot"], sens[1]);
}

#[test]
fn beta_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let s = ok(&["beta-study", "--betas", "0,1e-3", "--out", out.to_str().unwrap()]);
    let beta = column(&out, "beta");
    assert_eq!(beta.len(), 2 * 201);
    let sens = column(&out, "sensitivity_t");
    assert_eq!(s["beta0"], sens[0]);
    assert_eq!(s["beta0.001"], sens[201]);
}

#[test]
fn optimize_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["optimize", "--t2-star", "1e-5", "--starts", "4", "--seed", "3", "--format", "json", "--out"];
    let sa = ok(&[&args[..], &[a.to_str().unwrap()]].concat());
    let sb = ok(&[&args[..], &[b.to_str().unwrap()]].concat());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(sa["sensitivity"], sb["sensitivity"]);
    let csv = dir.path().join("c.csv");
    ok(&["optimize", "--t2-star", "1e-5", "--starts", "4", "--seed", "3", "--out", csv.to_str().unwrap()]);
    let (_, rows) = read_csv(&csv);
    let sens = rows.iter().find(|r| r[0] == "sensitivity_t").unwrap();
    assert_eq!(sens[1], sa["sensitivity"]);
}

#[test]
fn sweep_resumes_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.csv");
    let resumed = dir.path().join("resumed.csv");
    let ckpt = dir.path().join("ckpt.csv");
    let vary = ["--vary", "a=1e-22:1e-19:5:log", "--vary", "gamma=0.01:0.1:3"];
    let s = ok(&[&["sweep", "--out", full.to_str().unwrap()][..], &vary].concat());
    assert_eq!(s["cells"], "15");
    assert_eq!(s["failed"], "0");

    ok(&[&["sweep", "--out", resumed.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()][..], &vary].concat());
    // keep five finished records plus a torn line, then resume
    let text = std::fs::read_to_string(&ckpt).unwrap();
    let mut kept: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    kept.push_str("7,1e-2");
    std::fs::write(&ckpt, kept).unwrap();
    ok(&[&["sweep", "--out", resumed.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()][..], &vary].concat());
    assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&resumed).unwrap());
}

#[test]
fn sweep_budget_is_enforced() {
    let out = nvlaser(&["sweep", "--vary", "a=1e-22:1e-19:50:log", "--vary", "gamma=0.01:0.1:50", "--budget", "100", "--out", "/nonexistent/x.csv"]);
    assert_eq!(out.status.code(), Some(60));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("category=optimize"), "{err}");
}

#[test]
fn missing_scenario_file_names_the_path() {
    let out = nvlaser(&["odmr", "--scenario", "/no/such/scenario.conf"]);
    assert_eq!(out.status.code(), Some(20));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error category=config code=20 message="), "{err}");
    assert!(err.contains("/no/such/scenario.conf"));
}

#[test]
fn bad_values_are_input_errors() {
    let out = nvlaser(&["odmr", "--gamma=-1", "--out", "/tmp/never.csv"]);
    assert_eq!(out.status.code(), Some(10));
    let out = nvlaser(&["sweep", "--vary", "nope=1:2:3", "--out", "/tmp/never.csv"]);
    assert_eq!(out.status.code(), Some(10));
}

#[test]
fn malformed_grid_is_a_usage_error() {
    let out = nvlaser(&["contrast-map", "--rabi", "1e4:1e7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("start:stop:count"));
}

#[test]
fn scenario_file_with_base_preset() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("mine.conf");
    std::fs::write(&conf, "base = D3\nname = mine\ndiode.gamma = 0.03\n").unwrap();
    let out = dir.path().join("o.csv");
    let s = ok(&["odmr", "--scenario", conf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(s["scenario"], "mine");
}
