use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/maryland.json");
const SCHEMA: &str = include_str!("../schema/report.schema.json");

fn nashmoser(sub: &str, out: &Path, config: &Path, overrides: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nashmoser"));
    cmd.arg(sub).arg("--config").arg(config).arg("--out-dir").arg(out);
    for o in overrides {
        cmd.arg("--override").arg(o);
    }
    cmd.env("RUST_LOG", "error").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn base() -> Value {
    serde_json::from_str(&fs::read_to_string(CONFIG).unwrap()).unwrap()
}

#[test]
fn maryland_run_writes_valid_report_and_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashmoser("run", dir.path(), Path::new(CONFIG), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(report["converged"], Value::Bool(true));
    let steps = report["steps"].as_array().unwrap().len();
    assert_eq!(steps, 8);
    let csv = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert_eq!(csv.lines().count(), steps + 1);
    assert_eq!(report["config_echo"], base());
}

#[test]
fn ledger_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ov = ["box.radius=48", "box.interior_radius=24"];
    for d in [&a, &b] {
        assert_eq!(nashmoser("run", d.path(), Path::new(CONFIG), &ov).status.code(), Some(0));
    }
    let la = fs::read(a.path().join("ledger.csv")).unwrap();
    let lb = fs::read(b.path().join("ledger.csv")).unwrap();
    assert!(!la.is_empty());
    assert_eq!(la, lb);
}

#[test]
fn free_operator_converges_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashmoser("run", dir.path(), Path::new(CONFIG), &["hopping.epsilon=0", "box.radius=32", "box.interior_radius=16"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], Value::Bool(true));
    for n in report["final_residual_norms"].as_array().unwrap() {
        assert_eq!(n["norm"].as_f64(), Some(0.0));
    }
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["params"]["mystery"] = Value::from(1);
    let p = write_config(dir.path(), &v);
    assert_eq!(nashmoser("run", dir.path(), &p, &[]).status.code(), Some(2));

    let missing = dir.path().join("absent.json");
    assert_eq!(nashmoser("run", dir.path(), &missing, &[]).status.code(), Some(2));

    let bad = nashmoser("run", dir.path(), Path::new(CONFIG), &["params.delta=-1"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = nashmoser("run", dir.path(), Path::new(CONFIG), &["box.interior_radius=500"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn check_theory_reports_the_theta_requirement() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashmoser("check-theory", dir.path(), Path::new(CONFIG), &[]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(1), "{text}");
    let line = text.lines().find(|l| l.starts_with("Theta requirement")).expect("requirement line");
    let exponent: f64 = line
        .trim_start_matches("Theta requirement: 10^")
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(exponent > 20.0, "{line}");
    assert!(line.contains("8^{2/delta} C0^{4/delta}"), "{line}");
    assert!(text.contains("FAILS"));
}

#[test]
fn verify_distal_on_maryland() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashmoser("verify-distal", dir.path(), Path::new(CONFIG), &["box.radius=32", "box.interior_radius=16"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("diophantine: gamma_best"));
    assert!(text.contains("): distal"));

    let out = nashmoser("verify-distal", dir.path(), Path::new(CONFIG), &["box.radius=32", "box.interior_radius=16", "params.gamma=100"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("NOT distal"));
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["box"] = serde_json::json!({"dimension": 1, "radius": 32, "interior_radius": 16});
    v["sweep"] = serde_json::json!({"epsilon": [0.0, 0.05], "radius": [24, 32]});
    let p = write_config(dir.path(), &v);
    let out = nashmoser("sweep", dir.path(), &p, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        assert!(row.starts_with(&format!("{i},")));
        assert!(row.ends_with(",ok"), "{row}");
        assert!(dir.path().join(format!("cell_{i:03}/report.json")).exists());
    }
}

#[test]
fn checkpoints_are_written_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashmoser(
        "run",
        dir.path(),
        Path::new(CONFIG),
        &["box.radius=32", "box.interior_radius=16", "output.checkpoint_dir=ckpt"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let steps = report["steps"].as_array().unwrap().len();
    for k in 1..=steps {
        for kind in ["q", "r"] {
            let p = dir.path().join(format!("ckpt/step_{k:03}_{kind}.bin"));
            assert!(p.metadata().unwrap().len() > 0, "{}", p.display());
        }
    }
}
