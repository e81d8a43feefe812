//! One test per acceptance criterion. Each prints a PASS/FAIL line to
//! stderr whether or not output capture is on.

use std::io::Write;

use hamlab::acceptance::{run_criterion, AcceptanceConfig};

fn check(id: u32) {
    let result = run_criterion(id, &AcceptanceConfig::default()).unwrap();
    let mut err = std::io::stderr().lock();
    writeln!(err, "{}", result.line()).unwrap();
    if !result.passed {
        writeln!(err, "{}", serde_json::to_string_pretty(&result.details).unwrap()).unwrap();
    }
    assert!(result.passed, "criterion {id} ({}) failed", result.slug);
}

#[test]
fn criterion_01_history_kernel() {
    check(1);
}

#[test]
fn criterion_02_energy_identity() {
    check(2);
}

#[test]
fn criterion_03_sparsity() {
    check(3);
}

#[test]
fn criterion_04_separability() {
    check(4);
}

#[test]
fn criterion_05_clock_angle() {
    check(5);
}

#[test]
fn criterion_06_geometric_lemma() {
    check(6);
}

#[test]
fn criterion_07_step_lemmas() {
    check(7);
}

#[test]
fn criterion_08_phase_estimation() {
    check(8);
}

#[test]
fn criterion_09_qj_contract() {
    check(9);
}

#[test]
fn criterion_10_product_optimization() {
    check(10);
}

#[test]
fn criterion_11_cldm_oracle() {
    check(11);
}

#[test]
fn criterion_12_slh_protocol() {
    check(12);
}
