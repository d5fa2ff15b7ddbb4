//! One test per acceptance criterion; each prints a single pass/fail line
//! followed by the measured values behind it.

use local_consensus::acceptance::{self, CriterionResult};

fn report(r: CriterionResult) {
    println!("{r}");
    assert!(r.passed, "criterion {} failed", r.id);
}

#[test]
fn criterion_01_trace_equivalence() {
    report(acceptance::criterion_1());
}

#[test]
fn criterion_02_worked_example() {
    report(acceptance::criterion_2());
}

#[test]
fn criterion_03_spatial_gain() {
    report(acceptance::criterion_3());
}

#[test]
fn criterion_04_half_gain() {
    report(acceptance::criterion_4());
}

#[test]
fn criterion_05_temporal_gain() {
    report(acceptance::criterion_5());
}

#[test]
fn criterion_06_noise() {
    report(acceptance::criterion_6());
}

#[test]
fn criterion_07_variance_equivalence() {
    report(acceptance::criterion_7());
}

#[test]
fn criterion_08_random_spacing() {
    report(acceptance::criterion_8());
}

#[test]
fn criterion_09_figures() {
    report(acceptance::criterion_9());
}

#[test]
fn criterion_10_structure() {
    report(acceptance::criterion_10());
}
