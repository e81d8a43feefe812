use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hamlab::acceptance::yes_instance;
use hamlab::circuit::{hm_wrap, random_circuit};
use hamlab::io;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn hamlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamlab"))
        .args(args)
        .env_remove("HAMLAB_MAX_QUBITS")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn compile_identity_emits_three_groups() {
    let out = hamlab(&["compile", fixture("identity.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    let groups: Vec<&str> = v["terms"].as_array().unwrap().iter().map(|t| t["group"].as_str().unwrap()).collect();
    assert_eq!(groups, ["in", "prop", "out"]);
}

#[test]
fn compile_is_canonical_and_round_trips() {
    let first = hamlab(&["compile", fixture("identity.json").to_str().unwrap()]);
    let second = hamlab(&["compile", fixture("identity.json").to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    let parsed = io::parse_hamiltonian_file(text.trim_end()).unwrap();
    assert_eq!(io::to_canonical_json(&parsed).unwrap(), text.trim_end());
}

#[test]
fn hm_wrapped_cswap_terms_have_sparsity_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inner = random_circuit(1, 2, 0, 1, &mut rng).unwrap();
    let wrapped = hm_wrap(&inner, &[1, 1]).unwrap();
    let path = write(&dir, "wrapped.json", &io::circuit_to_json(&wrapped).unwrap());
    let out_path = dir.path().join("h.json");
    let out = hamlab(&["compile", &path, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    let cswaps: Vec<&Value> = v["terms"].as_array().unwrap().iter().filter(|t| t["gate"] == "cswap").collect();
    assert_eq!(cswaps.len(), 2);
    for t in cswaps {
        assert_eq!(t["sparsity"], 2);
    }
}

#[test]
fn malformed_json_exits_two_with_error_object() {
    let out = hamlab(&["compile", fixture("broken.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
}

#[test]
fn missing_file_is_an_input_error() {
    let out = hamlab(&["report", "spectrum", "/nonexistent/circuit.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn qubit_cap_is_an_invariant_violation() {
    let out = Command::new(env!("CARGO_BIN_EXE_hamlab"))
        .args(["compile", fixture("identity.json").to_str().unwrap()])
        .env("HAMLAB_MAX_QUBITS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(hamlab(&["--tol", "abc", "selftest"]).status.code(), Some(64));
    assert_eq!(hamlab(&["selftest", "--tol", "-1"]).status.code(), Some(64));
    assert_eq!(hamlab(&["selftest", "--filter", "no-such-criterion"]).status.code(), Some(64));
    assert_eq!(hamlab(&["report", "nonsense", "x.json"]).status.code(), Some(64));
    assert_eq!(hamlab(&[]).status.code(), Some(64));
}

#[test]
fn gap_report_on_three_step_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = random_circuit(1, 1, 1, 3, &mut rng).unwrap();
    let path = write(&dir, "c.json", &io::circuit_to_json(&c).unwrap());
    let out = hamlab(&["report", "gap", &path]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    let r = &v["result"];
    for key in ["gap_kernel_sum", "v", "cos_theta", "corollary_holds"] {
        assert!(!r[key].is_null(), "missing {key}");
    }
    assert_eq!(r["corollary_holds"], true);
    assert_eq!(v["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn min_product_on_antisymmetric_projector_is_zero() {
    let out = hamlab(&["report", "min-product", fixture("antisymmetric.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert!(v["result"]["value"].as_f64().unwrap().abs() < 1e-3);
    assert_eq!(v["result"]["restarts"]["count"], 50);
}

#[test]
fn honest_yes_instance_proof_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let inst = yes_instance().unwrap();
    let path = write(&dir, "yes.json", &io::instance_to_json(&inst).unwrap());
    let out = hamlab(&["report", "slh-verify", &path, "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json_stdout(&out)["result"];
    assert_eq!(r["accept"], true);
    assert!(r["E"].as_f64().unwrap() <= inst.a());
}

#[test]
fn explicit_proof_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let inst = yes_instance().unwrap();
    let path = write(&dir, "yes.json", &io::instance_to_json(&inst).unwrap());
    // Every qubit in |1>: energy 4 on the |1><1| terms, above the threshold.
    let ones = hamlab::qstate::PureState::basis(2, 3).unwrap().to_density();
    let proof = hamlab::cldm::honest_prover_from_sides(&inst, &ones, &ones).unwrap();
    let proof_path = write(&dir, "proof.json", &io::proof_to_json(&proof).unwrap());
    let out = hamlab(&["report", "slh-verify", &path, "--proof", &proof_path]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert_eq!(v["result"]["accept"], false);
    assert_eq!(v["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn reports_are_reproducible_per_seed() {
    let f = fixture("antisymmetric.json");
    let a = hamlab(&["report", "qj", f.to_str().unwrap(), "--seed", "11"]);
    let b = hamlab(&["report", "qj", f.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn history_and_clock_angle_reports_pass() {
    let f = fixture("identity.json");
    for kind in ["history", "clock-angle", "spectrum"] {
        let out = hamlab(&["report", kind, f.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{kind}");
        assert_eq!(json_stdout(&out)["passed"], true);
    }
}

#[test]
fn phase_estimate_rejects_missing_term() {
    let f = fixture("antisymmetric.json");
    let out = hamlab(&["report", "phase-estimate", f.to_str().unwrap(), "--term", "3"]);
    assert_eq!(out.status.code(), Some(64));
    let ok = hamlab(&["report", "phase-estimate", f.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn selftest_filter_runs_gap_criteria_only() {
    let out = hamlab(&["selftest", "--filter", "gap"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let lines: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids: Vec<u64> = lines.iter().map(|l| l["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [5, 6]);
    assert!(lines.iter().all(|l| l["passed"] == true));
}
