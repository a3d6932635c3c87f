//! Channels from a system-ancilla unitary, and a pulse search for a target channel.
//!
//!     cargo run --release --example channel_design

use susygate::channel::{
    evolve_and_trace, kraus_from_unitary, realized_channel, synthesize_channel, DescentOptions, JointSystem,
};
use susygate::dyson::ControlPulse;
use susygate::matrix::{eigvalsh, OperatorExt};
use susygate::random::{random_density, random_pure_state, random_unitary, rng};
use susygate::spectrum::anharmonic_spectrum;

fn main() -> susygate::Result<()> {
    let mut r = rng(1);
    let u = random_unitary(6, &mut r);
    let anc = random_pure_state(2, &mut r);
    let ch = kraus_from_unitary(&u, 3, &anc)?;
    let rho = random_density(3, &mut r);
    let gap = (ch.apply(&rho)? - evolve_and_trace(&u, &rho, &anc)?).frobenius();
    println!("random 3x2 dilation: {} Kraus operators, TP defect {:.1e}", ch.kraus().len(), ch.tp_defect());
    println!("  Choi spectrum {:?}", eigvalsh(&ch.choi()).iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>());
    println!("  Kraus path vs partial trace: {gap:.1e}");

    // plant a pulse on the coupled oscillator + qubit, then search for it from zero
    let spec = anharmonic_spectrum(0.05, 0.02, 3, None)?;
    let joint = JointSystem::new(&spec, 2, 1.0, 0.1)?;
    let anc = joint.ancilla_ground();
    let planted = ControlPulse::new(3.0, vec![0.02, -0.01, 0.015])?;
    let target = realized_channel(&joint, &planted, &anc)?.choi();
    let rep = synthesize_channel(&target, &joint, &anc, 3.0, 1, 0.0, DescentOptions::default())?;
    println!(
        "pattern search: Choi distance {:.2e} after {} evaluations (converged: {}), pulse {:?}",
        rep.choi_distance,
        rep.evaluations,
        rep.converged,
        rep.pulse.coeffs().iter().map(|c| format!("{c:.5}")).collect::<Vec<_>>()
    );
    println!("  TP defect of the first-order channel {:.2e}, CP defect {:.1e}", rep.tp_defect, rep.cp_defect);
    Ok(())
}
