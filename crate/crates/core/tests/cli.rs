use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn isskit(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isskit"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("ISSKIT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn coupled_linear_example_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isskit(tmp.path(), &["example", "--id", "coupled-linear", "--a12", "0.9", "--a21", "0.9", "--n-interior", "60"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(&tmp.path().join("coupled-linear"));
    assert!(r["headline"].as_str().unwrap().starts_with("small-gain holds"));
    assert_eq!(r["verdict"], Value::Bool(true));
}

#[test]
fn small_gain_cycle_two_fails_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isskit(tmp.path(), &["small-gain", "--gains", &data("gains_fail.json")]);
    assert_eq!(o.status.code(), Some(1));
    let dir = tmp.path().join("small-gain");
    let r = report(&dir);
    let w = r["witness_files"].as_array().unwrap();
    assert!(!w.is_empty());
    assert!(dir.join(w[0].as_str().unwrap()).exists());

    let o = isskit(tmp.path(), &["small-gain", "--gains", &data("gains_pass.json")]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn missing_spec_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isskit(tmp.path(), &["simulate", "--spec", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    let o = isskit(tmp.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    let o = isskit(tmp.path(), &["example", "--id", "turing"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "7", "--n-interior", "50", "example", "--id", "semilinear-energy", "--samples", "200"];
    assert_eq!(isskit(a.path(), &args).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_isskit"))
        .arg("--out")
        .arg(b.path())
        .args(args)
        .env("ISSKIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let (da, db) = (a.path().join("semilinear-energy"), b.path().join("semilinear-energy"));
    assert_eq!(dir_bytes(&da), dir_bytes(&db));
}

#[test]
fn simulate_and_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isskit(tmp.path(), &["--t-end", "0.5", "simulate", "--spec", &data("coupled.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let dir = tmp.path().join("simulate");
    assert!(dir.join("trajectory.csv").exists() && dir.join("norms.csv").exists());
    assert_eq!(report(&dir)["status"], "pass");

    let o = isskit(tmp.path(), &["spectrum", "--spec", &data("unstable.json")]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&tmp.path().join("spectrum"));
    assert_eq!(r["details"]["hurwitz"], Value::Bool(false));
    let top = r["details"]["spectral_abscissa"].as_f64().unwrap();
    assert!((top - 0.5).abs() < 1e-2, "{top}");
}

#[test]
fn omega_path_refused_without_small_gain() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(isskit(tmp.path(), &["omega-path", "--gains", &data("gains_pass.json")]).status.code(), Some(0));
    assert!(tmp.path().join("omega-path/omega_path.json").exists());
    let o = isskit(tmp.path(), &["omega-path", "--gains", &data("gains_fail.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!report(&tmp.path().join("omega-path"))["witness_files"].as_array().unwrap().is_empty());
}

#[test]
fn certify_energy_and_overclaim() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["certify", "--spec", &data("semilinear.json"), "--gain", "linear:2", "--samples", "200"];
    let o = isskit(tmp.path(), &[&base[..], &["--alpha", "power:0.5:2"]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = isskit(tmp.path(), &[&base[..], &["--alpha", "power:5:2"]].concat());
    assert_eq!(o.status.code(), Some(1));
    let dir = tmp.path().join("certify");
    assert!(!report(&dir)["witness_files"].as_array().unwrap().is_empty());
}

#[test]
fn linearize_radius_and_refusal() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isskit(tmp.path(), &["linearize", "--spec", &data("logistic.json"), "--samples-per-level", "40", "--iterations", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let rho = report(&tmp.path().join("linearize"))["details"]["rho"].as_f64().unwrap();
    assert!(rho > 0.0 && rho < 10.0, "{rho}");

    let o = isskit(tmp.path(), &["linearize", "--spec", &data("unstable.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!report(&tmp.path().join("linearize"))["witness_files"].as_array().unwrap().is_empty());
}

#[test]
fn composite_and_envelope() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isskit(
        tmp.path(),
        &[
            "--t-end",
            "1",
            "composite",
            "--gains",
            &data("gains_pass.json"),
            "--spec",
            &data("coupled.json"),
            "--parts",
            "l2:2,l2:2",
            "--trajectories",
            "4",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(tmp.path().join("composite/composite_decrease.json").exists());

    let o = isskit(tmp.path(), &["--t-end", "4", "envelope", "--spec", &data("coupled.json"), "--gamma", "linear:2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(&tmp.path().join("envelope"));
    assert!(r["details"]["a"].as_f64().unwrap() > 0.0);
}
