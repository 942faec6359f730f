use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sepcert::physmodels::{thermal_dataset_ed, ModelSpec};
use sepcert::witnesslab::Witness;
use sepcert::{Axis, CorrelationDataset, Label};
use serde_json::Value;
use tempfile::TempDir;

fn sepcert(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepcert"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Runs `generate` and returns the dataset path.
fn generate(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let out = dir.path().join(name);
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    let o = sepcert(&out, &full);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("dataset.json")
}

#[test]
fn werner_singlet_file() {
    let dir = TempDir::new().unwrap();
    let path = generate(&dir, "g", &["werner", "--lambda", "0"]);
    let ds = CorrelationDataset::read(&path).unwrap();
    let minus_ones: Vec<Label> = ds.iter().filter(|&(_, v)| v == -1.0).map(|(l, _)| l).collect();
    assert_eq!(minus_ones, Axis::ALL.map(|a| Label::two(0, 1, a, a)).to_vec());
    assert_eq!(json(&path)["format_version"], 1);
}

#[test]
fn certify_werner_exit_codes_and_outputs() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "g", &["werner", "--lambda", "0"]);
    let out = dir.path().join("c");
    let o = sepcert(&out, &["certify", data.to_str().unwrap(), "--dump-layout", "--solver-trace"]);
    assert_eq!(code(&o), 3);
    let sol = json(out.join("solution.json"));
    assert!((sol["lambda_star"].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-6);
    assert_eq!(sol["status"], "optimal");
    assert_eq!(sol["format_version"], 1);
    for f in ["witness.json", "layout.txt", "trace.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 3);
    assert_eq!(manifest["config"]["global"]["tol"], 1e-8);
    assert!(manifest.to_string().find("time").is_none(), "manifest carries no timestamps");

    // the witness is violated by its own data and saturated by product states
    let w = out.join("witness.json");
    let e = dir.path().join("e");
    assert_eq!(code(&sepcert(&e, &["witness", "eval", w.to_str().unwrap(), data.to_str().unwrap()])), 3);
    assert_eq!(json(e.join("evaluation.json"))["violated"], true);
    let s = dir.path().join("s");
    assert_eq!(code(&sepcert(&s, &["oracle", "product-search", w.to_str().unwrap(), "--restarts", "50"])), 0);
    let search = json(s.join("product_search.json"));
    assert_eq!(search["matched"], true);
    assert!((search["bound"].as_f64().unwrap() - 1.0 / 3.0).abs() <= 1e-6);

    // noisy Werner data do not violate it
    let noisy = generate(&dir, "n", &["werner", "--lambda", "0.9"]);
    assert_eq!(code(&sepcert(&e, &["witness", "eval", w.to_str().unwrap(), noisy.to_str().unwrap()])), 0);
}

#[test]
fn product_random_is_separable_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir, "a", &["product-random", "--n", "4", "--seed", "9"]);
    let b = generate(&dir, "b", &["--seed", "9", "product-random", "--n", "4"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = generate(&dir, "c", &["product-random", "--n", "4", "--seed", "10"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let o = sepcert(&dir.path().join("cert"), &["certify", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("separable-compatible"));
}

#[test]
fn quench_initial_state_is_a_single_flip() {
    let dir = TempDir::new().unwrap();
    let path = generate(&dir, "q", &["quench-1d", "--n", "64", "--time", "0"]);
    let ds = CorrelationDataset::read(&path).unwrap();
    let z: Vec<f64> = (0..64).map(|i| ds.one(i, Axis::Z).unwrap()).collect();
    assert_eq!(z.iter().filter(|&&v| v == -1.0).count(), 1);
    assert_eq!(z.iter().filter(|&&v| v == 1.0).count(), 63);
    assert!(ds.two_body().filter(|t| t.2 == Axis::X).all(|t| t.4 == 0.0));
}

#[test]
fn quench_witness_has_z_zz_and_transverse_groups() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "q", &["quench-1d", "--n", "64", "--time", "10"]);
    let out = dir.path().join("c");
    assert_eq!(code(&sepcert(&out, &["certify", data.to_str().unwrap()])), 3);
    let w = Witness::read(out.join("witness.json")).unwrap();
    let (mut z, mut zz, mut perp) = (0, 0, 0);
    for label in w.coefficients.keys() {
        match *label {
            Label::One { axis: Axis::Z, .. } => z += 1,
            Label::Two { a: Axis::Z, b: Axis::Z, .. } => zz += 1,
            Label::Two { a, b, .. } if a == b => perp += 1,
            other => panic!("unexpected label {other}"),
        }
    }
    assert_eq!((z, zz, perp), (64, 2016, 4032));
    // the two transverse coefficients of each pair coincide
    for (label, &v) in &w.coefficients {
        if let Label::Two { i, j, a: Axis::X, .. } = *label {
            assert_eq!(v, w.coefficients[&Label::two(i, j, Axis::Y, Axis::Y)]);
        }
    }
}

#[test]
fn thermal_file_matches_exact_diagonalization() {
    let dir = TempDir::new().unwrap();
    let path = generate(&dir, "t", &["thermal", "--model", "ising", "--n", "8", "--g", "1", "--temp", "0.1"]);
    let ds = CorrelationDataset::read(&path).unwrap();
    let want = thermal_dataset_ed(&ModelSpec::ising(8, 1.0), 0.1).unwrap();
    assert_eq!(ds.len(), want.len());
    for (label, v) in want.iter() {
        assert!((ds.get(&label).unwrap() - v).abs() <= 1e-12, "{label}");
    }
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn quench_sweep_curve() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = sepcert(&out, &["sweep", "quench-1d", "--n", "64", "--time", "1,2,3,4,5,6,7,8,9,10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("sweep.csv"));
    assert_eq!(
        rows[0],
        ["parameter", "lambda_star", "gap", "iterations", "structure_witness", "bipartite_witness", "concurrence_robustness", "status"]
    );
    assert_eq!(rows.len(), 11);
    let lambdas: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    for r in &rows[1..] {
        assert_eq!(r[7], "optimal");
        assert!(!r[6].is_empty(), "quench rows carry the concurrence robustness");
    }
    assert!(lambdas.iter().all(|&l| l > 0.0), "{lambdas:?}");
    assert!((lambdas[9] - 0.177764343).abs() <= 1e-7);
    // grid order is preserved
    let params: Vec<f64> = rows[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(params, (1..=10).map(f64::from).collect::<Vec<_>>());
}

#[test]
fn heisenberg_sweep_and_reproducibility() {
    let dir = TempDir::new().unwrap();
    let grid = "0.1,0.5,1,1.5,2,3,5";
    let args = ["sweep", "thermal", "--model", "heisenberg", "--n", "8", "--temp", grid];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&sepcert(&a, &args)), 0);
    assert_eq!(code(&sepcert(&b, &args)), 0);
    assert_eq!(fs::read(a.join("sweep.csv")).unwrap(), fs::read(b.join("sweep.csv")).unwrap());
    let rows = read_csv(&a.join("sweep.csv"));
    let structure: Vec<f64> = rows[1..].iter().map(|r| r[4].parse().unwrap()).collect();
    // the optimized structure-factor witness is violated when cold and satisfied when hot
    assert!(structure[0] < 2.0 && structure[6] > 2.0, "{structure:?}");
    for r in &rows[1..] {
        assert!(r[6].is_empty(), "no concurrence column for thermal data");
        let violated = r[4].parse::<f64>().unwrap() < 2.0;
        if violated {
            assert!(r[1].parse::<f64>().unwrap() > 1e-6, "SDP misses a structure-factor detection at T = {}", r[0]);
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    assert_eq!(code(&sepcert(&out, &["sweep", "werner", "--lambda"])), 2);
    assert_eq!(code(&sepcert(&out, &["sweep", "werner", "--lambda", ""])), 2);
    assert_eq!(code(&sepcert(&out, &["generate", "werner", "--lambda", "1.5"])), 2);
    assert_eq!(code(&sepcert(&out, &["generate", "quench-1d", "--n", "1", "--time", "1"])), 2);
    assert_eq!(code(&sepcert(&out, &["--level", "3", "certify", "missing.json"])), 2);
    assert_eq!(code(&sepcert(&out, &["certify", "missing.json"])), 2);
    assert_eq!(code(&sepcert(&out, &["--tol", "-1", "certify", "missing.json"])), 2);
    assert_eq!(code(&sepcert(&out, &["frobnicate"])), 2);
    // a forced scheme that does not fit the data
    let q = generate(&dir, "q", &["quench-1d", "--n", "4", "--time", "1"]);
    let o = sepcert(&out, &["--scheme", "rotation", "certify", q.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("scheme"));
}

#[test]
fn solver_failure_exits_1() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "g", &["werner", "--lambda", "0"]);
    let out = dir.path().join("c");
    let o = sepcert(&out, &["--max-iter", "2", "certify", data.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(out.join("solution.json"))["status"], "iteration-limit");
    assert!(!out.join("witness.json").exists());
}

#[test]
fn forced_schemes_agree_on_werner() {
    let dir = TempDir::new().unwrap();
    let data = generate(&dir, "g", &["werner", "--lambda", "0.2"]);
    let mut lambdas = Vec::new();
    for scheme in ["auto", "general", "axis", "transverse", "rotation"] {
        let out = dir.path().join(scheme);
        assert_eq!(code(&sepcert(&out, &["--scheme", scheme, "certify", data.to_str().unwrap()])), 3);
        lambdas.push(json(out.join("solution.json"))["lambda_star"].as_f64().unwrap());
    }
    let want = 1.0 - 1.0 / (3.0 * 0.8);
    assert!(lambdas.iter().all(|l| (l - want).abs() <= 1e-6), "{lambdas:?}");
    let out = dir.path().join("level2");
    assert_eq!(code(&sepcert(&out, &["--level", "2", "certify", data.to_str().unwrap()])), 3);
}
