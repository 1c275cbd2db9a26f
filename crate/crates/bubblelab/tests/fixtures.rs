//! Stored reference values: oracle agreement and drift detection.

mod common;

use approx::assert_relative_eq;
use bubblelab::fixtures::{self, compare, FixtureFile};
use common::{bessel_j0_first_zero, sphere_area};
use proptest::prelude::*;

fn stored() -> FixtureFile {
    let path = fixtures::default_dir().join(fixtures::FILE_NAME);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn value(f: &FixtureFile, name: &str) -> f64 {
    f.entries.iter().find(|e| e.name == name).unwrap_or_else(|| panic!("missing entry {name}")).value
}

#[test]
fn stored_values_agree_with_closed_forms() {
    let f = stored();
    assert_eq!(f.schema_version, fixtures::SCHEMA_VERSION);
    for n in 4..=8 {
        let nf = n as f64;
        let sharp = (nf - 2.0) / 2.0 * sphere_area(n).powf(1.0 / (nf - 1.0));
        assert_relative_eq!(value(&f, &format!("escobar/n={n}/s_star")), sharp, max_relative = 1e-9);
        assert_relative_eq!(value(&f, &format!("escobar/n={n}/theta")), 2.0 / (nf - 3.0), max_relative = 1e-9);
    }
    let j = bessel_j0_first_zero();
    assert_relative_eq!(value(&f, "window/disk/n=2/lambda1"), j * j, max_relative = 1e-9);
    // unordered distinct pairs of the four critical angles of cos 2θ
    assert_eq!(value(&f, "reduced/circle/cos2theta/k=2/critical_count"), 6.0);
    assert_relative_eq!(value(&f, "reduced/circle/cos2theta/k=2/min_value"), -2.0, max_relative = 1e-12);
}

#[test]
fn drift_names_the_entry() {
    let f = stored();
    let mut tampered = f.clone();
    tampered.entries[3].value *= 1.001;
    let report = compare(&tampered, &f.entries).unwrap();
    assert!(!report.pass);
    assert_eq!(report.failures(), vec![f.entries[3].name.as_str()]);
}

#[test]
fn missing_and_unexpected_entries_fail() {
    let f = stored();
    let mut fewer = f.clone();
    let dropped = fewer.entries.pop().unwrap();
    let report = compare(&fewer, &f.entries).unwrap();
    assert!(!report.pass);
    assert_eq!(report.unexpected, vec![dropped.name.clone()]);
    let report = compare(&f, &fewer.entries).unwrap();
    assert_eq!(report.missing, vec![dropped.name]);
    let mut old = f.clone();
    old.schema_version += 1;
    assert!(compare(&old, &f.entries).is_err());
}

proptest! {
    #[test]
    fn comparison_respects_tolerances(index in 0usize..31, factor in -1e-3f64..1e-3) {
        let f = stored();
        let index = index % f.entries.len();
        let mut shifted = f.clone();
        let e = &mut shifted.entries[index];
        e.value += factor * e.value.abs().max(1.0);
        let report = compare(&shifted, &f.entries).unwrap();
        prop_assert_eq!(report.pass, factor.abs() <= f.entries[index].tolerance);
        prop_assert!(compare(&f, &f.entries).unwrap().pass);
    }
}
