//! First-order gate of a Fourier pulse against the brute-force propagator.
//!
//! The gap shrinks four-fold each time the pulse amplitude halves.
//!
//!     cargo run --release --example dyson_gate

use susygate::dyson::{dyson_gate, propagate_oracle, ControlPulse, OracleOptions};
use susygate::matrix::OperatorExt;
use susygate::spectrum::anharmonic_spectrum;

fn main() -> susygate::Result<()> {
    let spec = anharmonic_spectrum(0.05, 0.02, 4, None)?;
    let pulse = ControlPulse::new(2.0, vec![0.3, -0.4, 0.2, 0.5, -0.1])?;
    let mut last = None;
    for eps in [0.2, 0.1, 0.05] {
        let p = pulse.scaled(eps);
        let first = dyson_gate(&spec, &p)?;
        let exact = propagate_oracle(&spec, &p, 64, OracleOptions::default())?;
        let gap = (&exact.gate - &first).frobenius();
        let ratio = last.map(|l: f64| format!("{:.3}", l / gap)).unwrap_or_default();
        println!("eps {eps:<5} steps {:>6}  ||exact - first order|| {gap:.3e}  {ratio}", exact.steps);
        last = Some(gap);
    }
    Ok(())
}
