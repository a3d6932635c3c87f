//! Regenerates the files under `fixtures/`.
//!
//! `planted_synth/` holds a spectrum, a planted pulse and the first-order gate
//! it produces, used as a known-answer target for `susygate synth`.
//! `pilot_filter_fit.json` records the spread of the filter-then-fit estimate
//! of a decay rate over many measurement records; the acceptance suite takes
//! its efficiency, seed and tolerance from there.
//!
//!     cargo run --release --example build_fixtures

use std::fs;
use std::path::Path;

use rand::Rng;
use serde_json::json;
use susygate::dyson::{ControlPulse, DysonExpansion};
use susygate::filter_fit::{filter_estimate, fit_parameters, sme_simulate, uniform_times, FitOptions, LindbladModel};
use susygate::matrix::MatrixRecord;
use susygate::random::rng;
use susygate::spectrum::anharmonic_spectrum;

const PLANTED_SEED: u64 = 41;
const PILOT_SEEDS: u64 = 20;

fn write(path: &Path, value: &impl serde::Serialize) {
    let mut text = serde_json::to_string_pretty(value).unwrap();
    text.push('\n');
    fs::write(path, text).unwrap();
    println!("wrote {}", path.display());
}

fn planted(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let (horizon, harmonics) = (10.0, 6);
    let spec = anharmonic_spectrum(0.1, 0.05, 4, None).unwrap();
    let mut r = rng(PLANTED_SEED);
    let raw: Vec<f64> = (0..2 * harmonics + 1).map(|_| r.random_range(-1.0..1.0)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let pulse = ControlPulse::new(horizon, raw.iter().map(|x| 0.05 * x / norm).collect()).unwrap();
    let target = DysonExpansion::for_position(&spec, horizon, harmonics).unwrap().gate(pulse.coeffs()).unwrap();
    write(&dir.join("spectrum.json"), &spec);
    write(&dir.join("pulse.json"), &pulse);
    write(&dir.join("target.json"), &MatrixRecord::from_matrix(&target));
}

fn pilot(path: &Path) {
    let (omega, gamma, horizon, dt) = (1.0, 0.7, 5.0, 1e-3);
    let range = [0.05, 1.95];
    let times = uniform_times(horizon, dt).unwrap();
    let truth = LindbladModel::driven_damped_qubit(omega, gamma);
    let rho0 = truth.rho0.clone().unwrap();
    let mut family = truth.clone();
    family.dissipators[0].range = Some(range);
    let tolerance = 0.10;
    let mut runs = Vec::new();
    let mut chosen = None;
    for &eta in &[1.0, 0.3, 0.1] {
        let errors: Vec<f64> = (0..PILOT_SEEDS)
            .map(|seed| {
                let sim = sme_simulate(&truth, "gamma", eta, &rho0, &times, seed).unwrap();
                let est = filter_estimate(&truth, sim.record.as_ref().unwrap(), "gamma", eta, &rho0, &times).unwrap();
                let fit = fit_parameters(&est, &family, FitOptions { tol: 1e-6, ..FitOptions::default() }).unwrap();
                (fit.theta[0] - gamma) / gamma
            })
            .collect();
        let max = errors.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        println!("eta = {eta}: max relative error {max:.4}");
        // efficiencies are scanned from high to low; keep the first that meets the tolerance
        if max <= tolerance && chosen.is_none() {
            chosen = Some(eta);
        }
        runs.push(json!({ "eta": eta, "relative_errors": errors, "max_abs_relative_error": max }));
    }
    write(
        path,
        &json!({
            "model": "driven damped qubit, H = (omega/2) sigma_x, L = sqrt(gamma) |0><1| monitored",
            "omega": omega,
            "gamma_true": gamma,
            "T": horizon,
            "dt": dt,
            "gamma_range": range,
            "grid_points": FitOptions::default().grid_points,
            "filter_model": "truth",
            "seeds": format!("0..{PILOT_SEEDS}"),
            "runs": runs,
            "chosen_eta": chosen.expect("no efficiency met the tolerance"),
            "tolerance": tolerance,
            "acceptance_seed": 2024,
        }),
    );
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    planted(&root.join("planted_synth"));
    pilot(&root.join("pilot_filter_fit.json"));
}
