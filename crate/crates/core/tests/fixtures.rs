//! Checked-in fixtures must match what the library produces today.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use susygate::dyson::{ControlPulse, DysonExpansion};
use susygate::matrix::{MatrixRecord, OperatorExt};
use susygate::spectrum::{anharmonic_spectrum, Spectrum};

fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn planted_target_is_current() {
    let d = dir().join("planted_synth");
    let spec: Spectrum = load(d.join("spectrum.json"));
    let pulse: ControlPulse = load(d.join("pulse.json"));
    let target = load::<MatrixRecord>(d.join("target.json")).to_matrix().unwrap();

    let fresh = anharmonic_spectrum(0.1, 0.05, 4, None).unwrap();
    for (a, b) in spec.energies.iter().zip(&fresh.energies) {
        assert!((a - b).abs() < 1e-12);
    }
    let norm = pulse.coeffs().iter().map(|c| c * c).sum::<f64>().sqrt();
    assert!((norm - 0.05).abs() < 1e-15);
    let regenerated = DysonExpansion::for_position(&spec, pulse.horizon(), pulse.harmonics()).unwrap().gate(pulse.coeffs()).unwrap();
    assert!((regenerated - target).frobenius() < 1e-14);
}

#[test]
fn pilot_record_is_consistent() {
    let pilot: Value = load(dir().join("pilot_filter_fit.json"));
    let tol = pilot["tolerance"].as_f64().unwrap();
    let chosen = pilot["chosen_eta"].as_f64().unwrap();
    let runs = pilot["runs"].as_array().unwrap();
    let first_ok = runs
        .iter()
        .find(|r| r["max_abs_relative_error"].as_f64().unwrap() <= tol)
        .map(|r| r["eta"].as_f64().unwrap());
    assert_eq!(first_ok, Some(chosen));
    for r in runs {
        let errs = r["relative_errors"].as_array().unwrap();
        assert_eq!(errs.len(), 20);
        let max = errs.iter().map(|e| e.as_f64().unwrap().abs()).fold(0.0, f64::max);
        assert_eq!(max, r["max_abs_relative_error"].as_f64().unwrap());
    }
}
