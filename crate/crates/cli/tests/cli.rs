use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn potential(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../potentials").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ids-lab")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn free_ids_residuals_are_small() {
    let dir = tempfile::tempdir().unwrap();
    let p = potential("free.json");
    let out = run(&["ids", "--potential", p.to_str().unwrap(), "--lambda", "25,50,100", "--grid", "64", "--out", dir.path().to_str().unwrap()]);
    assert_ok(&out);
    let mut rd = csv::Reader::from_path(dir.path().join("ids.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let col = rd.headers().unwrap().iter().position(|h| h == "residual").unwrap();
    for r in &rows {
        let res: f64 = r[col].parse().unwrap();
        assert!(res.abs() < 0.01, "{r:?}");
    }
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn non_hermitian_potential_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"lattice": [[6.283185307179586, 0], [0, 6.283185307179586]],
            "coeffs": [{"m": [1, 0], "re": 1.0, "im": 0.5}, {"m": [-1, 0], "re": 1.0, "im": 0.5}]}"#,
    )
    .unwrap();
    let out = run(&["ids", "--potential", bad.to_str().unwrap(), "--lambda", "25", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[1, 0]") && err.contains("[-1, 0]"), "{err}");
}

#[test]
fn truncated_json_and_missing_energies_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"lattice": [[1, 0]]"#).unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["ids", "--potential", bad.to_str().unwrap(), "--lambda", "25", "--out", d]);
    assert_eq!(out.status.code(), Some(2));
    let p = potential("free.json");
    let out = run(&["ids", "--potential", p.to_str().unwrap(), "--out", d]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_root_bracket_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = potential("mixed.json");
    let out = run(&["schur-check", "--potential", p.to_str().unwrap(), "--r-min", "100", "--nodes", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn perturb_check_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["perturb-check", "--instances", "1000", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    assert_ok(&out);
    let r = json(&dir.path().join("perturb.json"));
    assert_eq!(r["violations"].as_array().unwrap().len(), 0);
    assert!(r["max_ratio_to_bound"].as_f64().unwrap() < 1.0);
}

#[test]
fn zones_census_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let p = potential("desk20.json");
    let out = run(&["zones", "--potential", p.to_str().unwrap(), "--rho-base", "1000", "--rn", "2", "--samples", "5000", "--out", dir.path().to_str().unwrap()]);
    assert_ok(&out);
    let r = json(&dir.path().join("zones.json"));
    assert_eq!(r["violations"], Value::Array(vec![]));
    assert!(r["resonant"].as_u64().unwrap() > 0);
}

#[test]
fn reduce1d_agrees_with_finite_differences() {
    let dir = tempfile::tempdir().unwrap();
    let p = potential("mixed.json");
    let out = run(&["reduce1d", "--potential", p.to_str().unwrap(), "--theta", "1,1", "--points", "3", "--out", dir.path().to_str().unwrap()]);
    assert_ok(&out);
    let r = json(&dir.path().join("reduce1d.json"));
    assert_eq!(r["violations"], Value::Array(vec![]));
    assert!(r["max_difference"].as_f64().unwrap() < 1e-6);
    assert!(r["min_triple_gap"].as_f64().unwrap() > 0.0);
}

#[test]
fn schur_check_on_shipped_class() {
    let dir = tempfile::tempdir().unwrap();
    let p = potential("mixed.json");
    let out = run(&["schur-check", "--potential", p.to_str().unwrap(), "--eta2", "-0.5", "--partner", "0.5", "--nodes", "2", "--out", dir.path().to_str().unwrap()]);
    assert_ok(&out);
    let r = json(&dir.path().join("schur.json"));
    assert_eq!(r["violations"], Value::Array(vec![]));
    let chk = &r["check"];
    assert_eq!(chk["roots"].as_array().unwrap().len(), 2);
    assert!(chk["max_mismatch"].as_f64().unwrap() < 1e-8);
    let mut rd = csv::Reader::from_path(dir.path().join("schur.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["eta2", "branch", "q", "residual"]);
    for rec in rd.records() {
        let rec = rec.unwrap();
        assert!(rec[3].parse::<f64>().unwrap().abs() < 1e-8);
    }
}

#[test]
fn replayed_config_reproduces_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let p = potential("square.json");
    let out = run(&[
        "volumes", "--potential", p.to_str().unwrap(), "--rho-base", "20", "--rn", "1", "--m-tilde", "1",
        "--strip-radius", "1", "--rho", "40", "--per-period", "8", "--mc-samples", "2000", "--out", a.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let cfg = a.path().join("config.json");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert_ok(&out);
    for f in ["volumes.json", "volumes.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    let r = json(&a.path().join("volumes.json"));
    assert_eq!(r["sectors"].as_array().unwrap().len(), 4);
}

#[test]
fn fit_asymptotics_reads_ids_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let p = potential("cosine.json");
    let out = run(&["ids", "--potential", p.to_str().unwrap(), "--rho-base", "5", "--samples", "8", "--grid", "8", "--k", "1", "--out", d]);
    assert_ok(&out);
    let csv = dir.path().join("ids.csv");
    let out = run(&["fit-asymptotics", "--input", csv.to_str().unwrap(), "--k", "1", "--bootstrap", "50", "--out", d]);
    assert_ok(&out);
    let r = json(&dir.path().join("fit.json"));
    assert_eq!(r["samples"], 8);
    assert!(r["fit"].is_object() || r["fit_error"].is_string());
}
