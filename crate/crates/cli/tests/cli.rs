use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use khessian_cli::{Cell, Table};
use serde_json::{json, Value};

fn run(config: &Value, out: &Path) -> (i32, String) {
    let cfg = out.join("config.json");
    fs::write(&cfg, config.to_string()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_khessian"))
        .arg(&cfg)
        .env("KHESSIAN_OUTPUT_DIR", out.join("results"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr);
    (o.status.code().unwrap(), text)
}

fn run_dir(out: &Path) -> PathBuf {
    let cmd = fs::read_dir(out.join("results")).unwrap().next().unwrap().unwrap().path();
    fs::read_dir(cmd).unwrap().next().unwrap().unwrap().path()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn check<'a>(rep: &'a Value, name: &str) -> &'a Value {
    rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

fn small_problem(lambda: f64) -> Value {
    json!({
        "grid": { "dim": 2, "points": 16, "half_length": 2.0 },
        "k": 2,
        "operator": { "kind": "polyharmonic", "m": 1 },
        "lambda": lambda,
        "datum": { "kind": "gaussian", "width": 0.5, "amplitude": 1.0 }
    })
}

#[test]
fn invalid_configs_exit_2_without_outputs() {
    let bad = [
        json!({}),
        json!({ "command": "solve" }),
        json!({ "command": "launch" }),
        json!({ "command": "solve", "problem": small_problem(0.0), "colour": 1 }),
        json!({ "command": "solve", "problem": small_problem(0.0), "sweep": { "lambdas": [1.0] } }),
        json!({ "command": "sweep", "problem": small_problem(0.0), "sweep": { "lambdas": [2.0, 1.0] } }),
        json!({ "command": "solve", "problem": { "grid": { "dim": 2, "points": 7, "half_length": 1.0 },
            "k": 1, "operator": { "kind": "polyharmonic", "m": 1 }, "lambda": 0.0,
            "datum": { "kind": "gaussian", "width": 0.5, "amplitude": 1.0 } } }),
        json!({ "command": "solve", "problem": { "grid": { "dim": 2, "points": 16, "half_length": 1.0 },
            "k": 3, "operator": { "kind": "polyharmonic", "m": 1 }, "lambda": 0.0,
            "datum": { "kind": "gaussian", "width": 0.5, "amplitude": 1.0 } } }),
        json!({ "command": "solve", "problem": { "grid": { "dim": 2, "points": 16, "half_length": 1.0 },
            "k": 1, "operator": { "kind": "polyharmonic", "m": 1 }, "lambda": 0.0,
            "datum": { "kind": "gaussian", "width": -0.5, "amplitude": 1.0 } } }),
        json!({ "command": "fixedpoint-demo", "fixedpoint": { "metric_seed": 1,
            "demo": { "map": "convolution_square", "dim": 4, "deltas": [0.1, 0.2] } } }),
        json!({ "command": "khessian-check", "khessian_check": { "seed": 1, "matrices": 10, "max_dim": 7 } }),
    ];
    for cfg in bad {
        let tmp = tempfile::tempdir().unwrap();
        let (code, msg) = run(&cfg, tmp.path());
        assert_eq!(code, 2, "{cfg}: {msg}");
        assert!(!tmp.path().join("results").exists(), "{cfg}");
    }
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.json");
    fs::write(&cfg, "").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_khessian"))
        .arg(&cfg)
        .env("KHESSIAN_OUTPUT_DIR", tmp.path().join("results"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("results").exists());
}

#[test]
fn solve_at_zero_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({ "command": "solve", "problem": small_problem(0.0) });
    let (code, msg) = run(&cfg, tmp.path());
    assert_eq!(code, 0, "{msg}");
    let dir = run_dir(tmp.path());
    let rep = report(&dir);
    assert_eq!(check(&rep, "picard_converged")["status"], "pass");
    assert_eq!(rep["outcome"], "pass");
    let mut reader = csv::Reader::from_path(dir.join("solution.csv")).unwrap();
    let mut rows = 0;
    for r in reader.records() {
        let r = r.unwrap();
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0);
        rows += 1;
    }
    assert_eq!(rows, 256);
}

#[test]
fn solve_small_problem_with_probes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "command": "solve",
        "problem": small_problem(0.05),
        "solve": { "uniqueness_scales": [0.0, 1.0, 1.2] }
    });
    let (code, msg) = run(&cfg, tmp.path());
    assert_eq!(code, 0, "{msg}");
    let rep = report(&run_dir(tmp.path()));
    for name in ["picard_converged", "contraction_ratio", "pde_residual", "uniqueness"] {
        assert_eq!(check(&rep, name)["status"], "pass", "{name}");
    }
    assert_eq!(rep["config"]["problem"]["lambda"], 0.05);
    assert!(rep["stages"].as_array().unwrap().len() >= 3);
}

#[test]
fn failures_still_write_a_report() {
    // a sweep that never leaves the small-λ regime cannot show a transition
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "command": "sweep",
        "problem": small_problem(0.0),
        "sweep": { "lambdas": [0.0, 0.01], "expect_transition": true }
    });
    let (code, _) = run(&cfg, tmp.path());
    assert_eq!(code, 1);
    let dir = run_dir(tmp.path());
    let rep = report(&dir);
    assert_eq!(rep["outcome"], "fail");
    assert_eq!(check(&rep, "divergence_transition")["status"], "fail");
    assert!(dir.join("continuation.csv").exists());

    // seeds far outside the ball are a compute error
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "command": "solve",
        "problem": small_problem(0.05),
        "solve": { "uniqueness_scales": [0.0, 50.0] }
    });
    let (code, _) = run(&cfg, tmp.path());
    assert_eq!(code, 1);
    let rep = report(&run_dir(tmp.path()));
    assert_eq!(rep["outcome"], "error");
    assert!(rep["error"].as_str().unwrap().contains("outside the ball"));
    assert_eq!(check(&rep, "picard_converged")["status"], "pass");
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let configs = [
        json!({ "command": "solve", "problem": small_problem(0.05), "solve": { "uniqueness_scales": [0.0, 1.0] } }),
        json!({ "command": "sweep", "problem": small_problem(0.0), "sweep": { "lambdas": [0.0, 0.05, 0.8, 3.2, 12.8] } }),
        json!({ "command": "khessian-check", "khessian_check": { "seed": 3, "matrices": 500,
            "divergence": { "grid": { "dim": 2, "points": 16, "half_length": 1.0 }, "k": 2, "cutoff": 5, "fields": 2 } } }),
        json!({ "command": "analysis", "analysis": { "seed": 5,
            "bmo": { "grid": { "dim": 2, "points": 32, "half_length": 1.0 }, "counts": [100, 200] },
            "boundedness": { "grid": { "dim": 2, "points": 16, "half_length": 1.0 }, "fields": 5, "cubes": 50 } } }),
        json!({ "command": "fixedpoint-demo", "fixedpoint": { "metric_seed": 7,
            "projector": { "polytopes": [{ "kind": "simplex", "dim": 3 }], "deltas": [0.3], "points": 100, "candidates": 200 },
            "demo": { "map": "convolution_square", "dim": 4, "deltas": [0.3, 0.2] } } }),
        json!({ "command": "linear-check", "linear_check": { "green_max_dim": 4,
            "riesz": { "seed": 2, "fields": 2, "cases": [{ "grid": { "dim": 2, "points": 16, "half_length": 1.0 }, "n": 1, "cutoff": 4 }] } } }),
    ];
    for cfg in configs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert!(run(&cfg, a.path()).0 != 2);
        assert!(run(&cfg, b.path()).0 != 2);
        let (da, db) = (run_dir(a.path()), run_dir(b.path()));
        assert_eq!(da.file_name(), db.file_name());
        let (fa, fb) = (csv_bytes(&da), csv_bytes(&db));
        assert!(!fa.is_empty(), "{cfg}");
        assert_eq!(fa, fb, "{cfg}");
    }
}

#[test]
fn table_round_trips_through_a_reader() {
    let tmp = tempfile::tempdir().unwrap();
    let values = [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324];
    let mut t = Table::new("one", &["a", "b", "c", "d", "label", "n"]);
    let mut row: Vec<Cell> = values.iter().map(|&v| v.into()).collect();
    row.push("converged".into());
    row.push(42usize.into());
    t.push(row);
    let path = khessian_cli::emit_csv(&t, tmp.path()).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["a", "b", "c", "d", "label", "n"]);
    let rec = reader.records().next().unwrap().unwrap();
    for (i, &v) in values.iter().enumerate() {
        assert_eq!(rec[i].parse::<f64>().unwrap(), v);
    }
    assert_eq!(&rec[4], "converged");
    assert_eq!(&rec[5], "42");

    let empty = Table::new("empty", &["x", "y"]);
    let path = khessian_cli::emit_csv(&empty, tmp.path()).unwrap();
    assert_eq!(fs::read_to_string(path).unwrap(), "x,y\n");

    let mut nan = Table::new("nan", &["x"]);
    nan.push(vec![f64::NAN.into()]);
    assert!(khessian_cli::emit_csv(&nan, tmp.path()).is_err());
    assert!(!tmp.path().join("nan.csv").exists());
}

#[test]
fn output_hash_ignores_output_dir() {
    let base = json!({ "command": "solve", "problem": small_problem(0.0) });
    let mut moved = base.clone();
    moved["output_dir"] = json!("/somewhere/else");
    let a = khessian_cli::RunConfig::parse(&base.to_string()).unwrap();
    let b = khessian_cli::RunConfig::parse(&moved.to_string()).unwrap();
    assert_eq!(khessian_cli::config_hash(&a), khessian_cli::config_hash(&b));
    let mut other = base.clone();
    other["problem"]["lambda"] = json!(0.5);
    let c = khessian_cli::RunConfig::parse(&other.to_string()).unwrap();
    assert_ne!(khessian_cli::config_hash(&a), khessian_cli::config_hash(&c));
}
