//! Reproduction of the published headline numbers. Each test prints one
//! line per checked quantity and fails if any of them is out of tolerance;
//! the tolerances are the constants in `nvmag::reproduce`.
//!
//! Run with `cargo test -p nvmag --test acceptance -- --nocapture --test-threads=1`.

use nvmag::reproduce::{self, ReproRow};
use nvmag::{Result, RunConfig};

fn check(name: &str, f: fn(&RunConfig) -> Result<Vec<ReproRow>>) {
    let rows = f(&RunConfig::published()).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(!rows.is_empty());
    for r in &rows {
        println!("{r}");
    }
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.quantity.as_str())
        .collect();
    assert!(failed.is_empty(), "{name}: out of tolerance: {failed:?}");
}

#[test]
fn shot_noise_limited_field_floor() {
    check("shot floor", reproduce::shot_floor);
}

#[test]
fn balanced_detection_reduction_rate() {
    check("reduction rate", reproduce::balanced_reduction);
}

#[test]
fn shot_noise_magnitudes_at_25_ma() {
    check("shot magnitudes", reproduce::shot_magnitudes);
}

#[test]
fn equivalent_photocurrent() {
    check("equivalent photocurrent", reproduce::equivalent_current);
}

#[test]
fn sensitivity_identity() {
    check("sensitivity identity", reproduce::sensitivity_identity);
}

#[test]
fn end_to_end_synthetic_sensitivity() {
    check("end to end", reproduce::end_to_end);
}

#[test]
fn nep_bandwidth_estimator() {
    check("nep", reproduce::nep_checks);
}

#[test]
fn odmr_fit_round_trip() {
    check("odmr fit", reproduce::odmr_round_trip);
}

#[test]
fn allan_deviation_white_noise_law() {
    check("adev", reproduce::adev_white_law);
}

#[test]
fn minimum_detectable_field() {
    check("minimum field", reproduce::min_field);
}

#[test]
fn oracle_equivalence() {
    check("oracles", reproduce::oracles);
}

#[test]
fn noise_model_fit_recovery() {
    check("noise fit", reproduce::noise_fit_recovery);
}

#[test]
fn report_covers_every_quantity() {
    assert_eq!(reproduce::CRITERIA.len(), 12);
    let cheap = RunConfig::published();
    let rows: usize = [
        reproduce::shot_floor,
        reproduce::balanced_reduction,
        reproduce::shot_magnitudes,
        reproduce::equivalent_current,
        reproduce::sensitivity_identity,
        reproduce::min_field,
    ]
    .iter()
    .map(|f| f(&cheap).unwrap().len())
    .sum();
    assert_eq!(rows, 8);
}
