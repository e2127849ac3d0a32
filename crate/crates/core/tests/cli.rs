//! Exit codes and output formats of the `qsr` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(name)
}

fn qsr(args: &[&str], model_file: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsr"))
        .arg(args[0])
        .arg(model_file)
        .args(&args[1..])
        .output()
        .expect("run qsr")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["report"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn validate_exit_codes() {
    let ok = qsr(&["validate"], &model("projective_qsr.json"));
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["passed"], true);

    let broken = qsr(&["validate"], &model("broken_qsr.json"));
    assert_eq!(broken.status.code(), Some(1));
    let v = json(&broken);
    assert_eq!(v["passed"], false);
    assert_eq!(check(&v, "operator_normalization[0]")["passed"], false);
    assert!(String::from_utf8_lossy(&broken.stderr).contains("operator_normalization[0]"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema_version\":1,").unwrap();
    let out = qsr(&["validate"], &bad);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));

    let missing = qsr(&["validate"], &dir.path().join("absent.json"));
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn validate_chain_modes() {
    let small = json(&qsr(&["validate"], &model("amplitude_damping_chain.json")));
    assert_eq!(small["report"]["mode"], "enumeration");
    let large = qsr(&["validate"], &model("weak_measurement_long_chain.json"));
    assert_eq!(large.status.code(), Some(0));
    assert_eq!(json(&large)["report"]["mode"], "monte-carlo");

    let demo = qsr(&["validate"], &model("history_dependent_chain.json"));
    assert_eq!(demo.status.code(), Some(0));
    assert!(json(&demo)["report"]["checks"].as_array().unwrap().iter().all(|c| c["name"] != "markov_independence"));
}

#[test]
fn validate_sde_models() {
    for name in ["qubit_decay_sde.json", "diffusive_jump_sde.json", "no_noise_sde.json"] {
        let out = qsr(&["validate"], &model(name));
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let coarse = qsr(&["validate", "--dt", "0.5"], &model("qubit_decay_sde.json"));
    assert_eq!(coarse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&coarse.stderr).contains("grid too coarse"));
}

#[test]
fn ndcheck_probe_chains() {
    for name in ["identity_probe.json", "cnot_probe.json", "partial_swap_probe.json"] {
        let out = qsr(&["ndcheck"], &model(name));
        assert_eq!(out.status.code(), Some(0), "{name}");
        let v = json(&out);
        assert!(check(&v, "equivalence")["residual"].as_f64().unwrap() <= 1e-10);
    }
    let identity = json(&qsr(&["ndcheck"], &model("identity_probe.json")));
    for name in ["probe_observables_commute", "system_observable_commutes", "propagator_commutes_with_past_records"] {
        assert_eq!(check(&identity, name)["residual"].as_f64().unwrap(), 0.0);
    }
    let recoupled = qsr(&["ndcheck"], &model("recoupling_probe.json"));
    assert_eq!(recoupled.status.code(), Some(1));
    assert!(check(&json(&recoupled), "system_observable_commutes")["residual"].as_f64().unwrap() > 0.1);

    assert_eq!(qsr(&["ndcheck"], &model("projective_qsr.json")).status.code(), Some(2));
}

#[test]
fn compare_against_oracles() {
    let flat = qsr(&["compare"], &model("no_noise_sde.json"));
    assert_eq!(flat.status.code(), Some(0));
    assert!(json(&flat)["max_distance"].as_f64().unwrap() <= 1e-12);

    let decay = qsr(&["compare", "--n-traj", "400", "--seed", "3"], &model("qubit_decay_sde.json"));
    assert_eq!(decay.status.code(), Some(0));
    let v = json(&decay);
    let fine = json(&qsr(&["compare", "--n-traj", "400", "--seed", "3", "--dt", "0.005"], &model("qubit_decay_sde.json")));
    let ratio = fine["bias_bound"].as_f64().unwrap() / v["bias_bound"].as_f64().unwrap();
    assert!((ratio - 0.5).abs() < 1e-9);

    let chain = qsr(&["compare", "--n-traj", "2000"], &model("amplitude_damping_chain.json"));
    assert_eq!(chain.status.code(), Some(0));

    let refused = qsr(&["compare"], &model("history_dependent_chain.json"));
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("no master-equation oracle for history-dependent kernels"));
}

#[test]
fn sample_csv_layout() {
    let out = qsr(&["sample", "--n-traj", "2000", "--seed", "9"], &model("qubit_decay_sde.json"));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trajectory_id,t,norm_sq,jump_1"));
    let (mut sum, mut count) = (0.0, 0usize);
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4);
        if cols[1] == "2" {
            sum += cols[2].parse::<f64>().unwrap();
            count += 1;
        }
    }
    assert_eq!(count, 2000);
    // likelihood ratio is a mean-one martingale; generous band for 2000 paths
    assert!((sum / count as f64 - 1.0).abs() < 0.1, "mean norm_sq {}", sum / count as f64);

    let dir = tempfile::tempdir().unwrap();
    let out = qsr(&["sample", "--n-traj", "5", "--out", dir.path().to_str().unwrap()], &model("diffusive_jump_sde.json"));
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert!(csv.starts_with("trajectory_id,t,norm_sq,X_1,X_2,jump_1\n"));

    let chain = qsr(&["sample", "--n-traj", "4"], &model("amplitude_damping_chain.json"));
    let text = String::from_utf8(chain.stdout).unwrap();
    assert!(text.starts_with("trajectory_id,step,outcome,norm_sq\n0,0,,1\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 4);

    let q = qsr(&["sample", "--n-traj", "3"], &model("projective_qsr.json"));
    assert!(String::from_utf8(q.stdout).unwrap().starts_with("trajectory_id,outcome,probability\n"));
}

#[test]
fn extract_qsr_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.json");
    let out = qsr(&["extract-qsr", "--out", path.to_str().unwrap()], &model("partial_swap_probe.json"));
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["kind"], "chain");
    assert_eq!(doc["grid"]["n_steps"], 3);
    assert_eq!(qsr(&["validate"], &path).status.code(), Some(0));

    let refused = qsr(&["extract-qsr"], &model("recoupling_probe.json"));
    assert_eq!(refused.status.code(), Some(2));
}
