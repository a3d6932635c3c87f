//! Monitor a driven, decaying qubit, filter the record, and fit the decay rate.
//!
//!     cargo run --release --example filter_fit

use susygate::filter_fit::{
    filter_estimate, fit_parameters, frobenius_gap, lindblad_evolve, sme_simulate, uniform_times, FitOptions, LindbladModel,
};

fn main() -> susygate::Result<()> {
    let gamma = 0.7;
    let truth = LindbladModel::driven_damped_qubit(1.0, gamma);
    let rho0 = truth.rho0.clone().unwrap();
    let times = uniform_times(5.0, 1e-3)?;
    let mut family = truth.clone();
    family.dissipators[0].range = Some([0.05, 1.95]);

    let clean = lindblad_evolve(&truth, &rho0, &times)?;
    let fit = fit_parameters(&clean, &family, FitOptions::default())?;
    println!("noiseless trajectory: gamma* = {:.8}", fit.theta[0]);

    for eta in [1.0, 0.1] {
        let sim = sme_simulate(&truth, "gamma", eta, &rho0, &times, 7)?;
        let est = filter_estimate(&truth, sim.record.as_ref().unwrap(), "gamma", eta, &rho0, &times)?;
        let fit = fit_parameters(&est, &family, FitOptions::default())?;
        let fitted = lindblad_evolve(&fit.fitted_model(&family)?, &rho0, &times)?;
        println!(
            "eta {eta}: gamma* = {:.4} ({:+.1}%), final-state gap filter vs fitted {:.3e}",
            fit.theta[0],
            100.0 * (fit.theta[0] - gamma) / gamma,
            frobenius_gap(est.final_state().unwrap(), fitted.final_state().unwrap())
        );
    }
    Ok(())
}
