use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_echo-qee"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn out_dir(root: &Path, name: &str) -> PathBuf {
    root.join(name)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn write_model(dir: &Path, name: &str, v0: &str, v1: &str, r0: &str) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        r#"{{"env_dim": 2, "epsilon": [0.3, -0.2],
            "H_E": [[[1,0],[0,0]], [[0,0],[-1,0]]],
            "V0": {v0}, "V1": {v1}, "R0": {r0}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

const ZERO: &str = "[[[0,0],[0,0]], [[0,0],[0,0]]]";
const SX: &str = "[[[0,0],[1,0]], [[1,0],[0,0]]]";
const SZ: &str = "[[[1,0],[0,0]], [[0,0],[-1,0]]]";
const THERMAL: &str = r#"{"kind": "thermal", "beta": 1.0}"#;

#[test]
fn scan_fig1_flags_tau0() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(tmp.path(), "fig1");
    let out = run(&["scan", "--scenario", "fig1", "--points", "801", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.join("scan.csv"));
    assert_eq!(header.join(","), echo_qee::cli::SCAN_COLUMNS.join(","));
    assert_eq!(rows.len(), 801);
    let tau = column(&header, &rows, "tau");
    let flag = column(&header, &rows, "flag_echo_induced");
    assert_eq!(tau[200], 1.0);
    assert_eq!(flag[200], 1.0);
    for (re, im) in column(&header, &rows, "W_echo_re").iter().zip(column(&header, &rows, "W_echo_im")) {
        assert!(re.hypot(im) <= 1.0 + 1e-9);
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("scan_summary.json")).unwrap()).unwrap();
    let taus = summary["summary"]["echo_induced_taus"].as_array().unwrap();
    assert!(taus.iter().any(|t| t.as_f64() == Some(1.0)));
}

#[test]
fn scan_snapshot_populations() {
    let tmp = tempfile::tempdir().unwrap();
    let half = out_dir(tmp.path(), "half");
    assert!(run(&["scan", "--scenario", "sec4b", "--c0", "0.5", "--out", half.to_str().unwrap()]).status.success());
    let (header, rows) = read_csv(&half.join("scan.csv"));
    assert_eq!(column(&header, &rows, "flag_echo_induced"), vec![0.0]);
    // mixed environment: entropy columns stay empty
    assert_eq!(rows[0][9], "");
    assert_eq!(rows[0][10], "");

    let biased = out_dir(tmp.path(), "biased");
    assert!(run(&["scan", "--scenario", "sec4b", "--c0", "0.7", "--out", biased.to_str().unwrap()]).status.success());
    let (header, rows) = read_csv(&biased.join("scan.csv"));
    assert_eq!(column(&header, &rows, "flag_echo_induced"), vec![1.0]);
    assert!((column(&header, &rows, "comm_echo")[0] - 0.4 * 2f64.sqrt()).abs() < 1e-12);

    let out = run(&["scan", "--scenario", "sec4b", "--points", "10", "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_model_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"env_dim": 2, "epsilon": [0, 0]"#).unwrap();
    let dir = out_dir(tmp.path(), "never");
    let out = run(&["scan", "--model", bad.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.exists());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let unknown = write_model(tmp.path(), "unknown.json", ZERO, SX, r#"{"kind": "thermal", "beta": 1.0, "x": 1}"#);
    let out = run(&["scan", "--model", unknown.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.exists());
}

#[test]
fn invalid_amplitudes_and_grid_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(tmp.path(), "o");
    let d = dir.to_str().unwrap();
    assert_eq!(run(&["scan", "--scenario", "fig1", "--a", "1,0", "--b", "1,0", "--out", d]).status.code(), Some(2));
    assert_eq!(run(&["scan", "--scenario", "fig1", "--a", "1,0", "--out", d]).status.code(), Some(2));
    assert_eq!(run(&["scan", "--scenario", "fig1", "--tau-start", "2", "--tau-stop", "1", "--out", d]).status.code(), Some(2));
    assert_eq!(run(&["scan", "--scenario", "fig1", "--points", "1", "--out", d]).status.code(), Some(2));
    assert!(!dir.exists());
    let ok = run(&["scan", "--scenario", "fig1", "--a", "0.6,0", "--b", "0,-0.8", "--points", "41", "--out", d]);
    assert!(ok.status.success());
}

#[test]
fn scan_output_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["one", "two"] {
        let dir = out_dir(tmp.path(), name);
        let out = run(&[
            "scan", "--scenario", "random", "--seed", "3", "--env-dim", "3", "--points", "101", "--out", dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        outputs.push(std::fs::read(dir.join("scan.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,"));
}

#[test]
fn spectral_static_coupling_and_infinite_temperature() {
    let tmp = tempfile::tempdir().unwrap();
    let stat = write_model(tmp.path(), "static.json", SZ, ZERO, THERMAL);
    let dir = out_dir(tmp.path(), "static");
    let out = run(&["spectral", "--model", stat.to_str().unwrap(), "--points", "101", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.join("spectral.csv"));
    assert_eq!(header.join(","), echo_qee::cli::SPECTRAL_COLUMNS.join(","));
    assert!(column(&header, &rows, "chi").iter().all(|c| c.abs() < 1e-12));

    let zx = write_model(tmp.path(), "zx.json", ZERO, SX, THERMAL);
    let dir = out_dir(tmp.path(), "hot");
    let out = run(&["spectral", "--model", zx.to_str().unwrap(), "--beta", "0", "--points", "101", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.join("spectral.csv"));
    assert!(column(&header, &rows, "phi").iter().all(|p| p.abs() < 1e-12));
    assert!(column(&header, &rows, "chi").iter().skip(1).all(|c| *c > 0.0));
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("spectral_psd.json")).unwrap()).unwrap();
    assert_eq!(sidecar["spectrum"]["method"], "bohr");
    assert_eq!(sidecar["spectrum"]["peaks"].as_array().unwrap().len(), 2);

    let generic = write_model(tmp.path(), "generic.json", SX, SZ, THERMAL);
    let out = run(&["spectral", "--model", generic.to_str().unwrap(), "--out", out_dir(tmp.path(), "g").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectral_comb_psd_vanishes_at_period() {
    let tmp = tempfile::tempdir().unwrap();
    let tau_star = 1.5f64;
    let peaks: Vec<String> =
        (-4..=4).map(|k| format!("[{}, 0.5]", 2.0 * std::f64::consts::PI * k as f64 / tau_star)).collect();
    let psd = tmp.path().join("comb.json");
    std::fs::write(&psd, format!(r#"{{"peaks": [{}]}}"#, peaks.join(","))).unwrap();
    let dir = out_dir(tmp.path(), "comb");
    let out = run(&[
        "spectral", "--psd", psd.to_str().unwrap(), "--tau-start", "0", "--tau-stop", "3", "--points", "3", "--gaussian", "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.join("spectral.csv"));
    assert_eq!(header.last().unwrap(), "W2_gauss_abs");
    let tau = column(&header, &rows, "tau");
    let chi = column(&header, &rows, "chi");
    assert_eq!(tau[1], tau_star);
    assert!(chi[1].abs() < 1e-10);

    let ohmic = tmp.path().join("ohmic.json");
    std::fs::write(&ohmic, r#"{"family": "ohmic", "alpha": 0.1, "cutoff": 2.0}"#).unwrap();
    let out = run(&["spectral", "--psd", ohmic.to_str().unwrap(), "--beta", "2", "--points", "5", "--out", out_dir(tmp.path(), "o").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn witness_verdicts_and_refusal() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(tmp.path(), "zx");
    let out = run(&["witness", "--scenario", "zx", "--points", "21", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("witness.json")).unwrap()).unwrap();
    assert_eq!(v["witness"]["verdict"], "certified-entangling");
    assert_eq!(v["witness"]["phi"].as_array().unwrap().len(), 20);

    let commuting = write_model(tmp.path(), "zz.json", ZERO, SZ, THERMAL);
    let dir = out_dir(tmp.path(), "zz");
    assert!(run(&["witness", "--model", commuting.to_str().unwrap(), "--points", "21", "--out", dir.to_str().unwrap()]).status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("witness.json")).unwrap()).unwrap();
    assert_eq!(v["witness"]["verdict"], "not-certified");

    let dir = out_dir(tmp.path(), "refused");
    let out = run(&["witness", "--scenario", "zx", "--eta", "0.5", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.exists());
    let nonstationary = write_model(tmp.path(), "ns.json", ZERO, SX, r#"{"kind": "random", "seed": 4}"#);
    let out = run(&["witness", "--model", nonstationary.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn reproduce_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(tmp.path(), "r");
    let d = dir.to_str().unwrap();
    assert!(run(&["reproduce", "fig1", "--out", d]).status.success());
    let (header, rows) = read_csv(&dir.join("fig1.csv"));
    assert_eq!(rows.len(), 801);
    let e_echo = column(&header, &rows, "E_echo");
    assert!((e_echo[200] - 1.0).abs() < 1e-9);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("fig1_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["extra"]["refinement"].as_array().unwrap().len(), 2);

    assert!(run(&["reproduce", "sec4b", "--out", d]).status.success());
    let (header, rows) = read_csv(&dir.join("sec4b.csv"));
    assert_eq!(rows.len(), 5);
    assert_eq!(column(&header, &rows, "separable_echo"), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    let w_pre = column(&header, &rows, "W_pre_re");
    for (w, c0) in w_pre.iter().zip([0.0, 0.25, 0.5, 0.7, 1.0]) {
        assert!((w - (2.0 * c0 - 1.0)).abs() < 1e-12);
    }
}
