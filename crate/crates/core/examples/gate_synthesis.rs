//! Ridge-regularized pulse design for a target gate, with the energy/residual trade-off.
//!
//!     cargo run --release --example gate_synthesis

use susygate::dyson::DysonExpansion;
use susygate::gate_synth::{sweep, synthesize, EnergyConstraint, SynthesisProblem};
use susygate::matrix::expm_hermitian;
use susygate::spectrum::anharmonic_spectrum;

fn main() -> susygate::Result<()> {
    let (horizon, harmonics) = (10.0, 6);
    let spec = anharmonic_spectrum(0.1, 0.05, 4, None)?;

    // a reachable target: the gate of a known small pulse
    let planted: Vec<f64> = (0..2 * harmonics + 1).map(|k| 0.01 * ((k as f64) * 0.7).sin()).collect();
    let target = DysonExpansion::for_position(&spec, horizon, harmonics)?.gate(&planted)?;
    let mut prob = SynthesisProblem::new(target, spec.clone(), horizon, harmonics, EnergyConstraint::Penalty(0.0));
    prob.allow_nonunitary = true;
    let rep = synthesize(&prob)?;
    let err = rep.pulse.coeffs().iter().zip(&planted).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    println!("planted target: residual {:.2e}, coefficient error {err:.2e}", rep.residual);

    // a unitary target: free evolution followed by a small rotation in the kept block
    let free = DysonExpansion::for_position(&spec, horizon, harmonics)?.free.clone();
    let gen = spec.position_in_eigenbasis()?;
    let target = expm_hermitian(&gen, 0.05) * free;
    let prob = SynthesisProblem::new(target, spec, horizon, harmonics, EnergyConstraint::Penalty(0.0));
    println!("{:>10} {:>12} {:>12} {:>10}", "lambda", "residual", "energy", "fidelity");
    let grid: Vec<f64> = (0..8).map(|i| 10f64.powi(i - 5)).collect();
    for r in sweep(&prob, &grid)? {
        println!("{:>10.1e} {:>12.4e} {:>12.4e} {:>10.6}", r.multiplier, r.residual, r.energy, r.fidelity);
    }

    let mut budgeted = prob.clone();
    budgeted.constraint = EnergyConstraint::Budget(1e-3);
    let r = synthesize(&budgeted)?;
    println!("energy budget 1e-3: multiplier {:.3e}, energy {:.4e}, residual {:.4e}", r.multiplier, r.energy, r.residual);
    Ok(())
}
