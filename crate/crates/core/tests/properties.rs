use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use susygate::channel::{evolve_and_trace, kraus_from_unitary};
use susygate::dyson::{dyson_gate, ControlPulse};
use susygate::filter_fit::{lindblad_evolve, sme_simulate, uniform_times, LindbladModel};
use susygate::fock::{even_part, momentum_op, odd_part, position_op, tau, GradedSpace};
use susygate::gate_synth::{stationarity_residual, sweep, synthesize, EnergyConstraint, SynthesisProblem};
use susygate::matrix::{commutator, expm_hermitian, identity, ComplexMatrix, OperatorExt, C64};
use susygate::random::{gaussian_matrix, random_density, random_hermitian, random_pure_state, random_unitary, rng};
use susygate::spectrum::{anharmonic_spectrum, build_h0};
use susygate::susy_toy::{effective_hamiltonian, vev_control, GaugeCoefficients, Tensor, VevControl};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn canonical_commutator_off_the_edge(m in 2usize..40) {
        let q = position_op(m).unwrap();
        let p = momentum_op(m).unwrap();
        prop_assert!(q.is_hermitian(0.0) && p.is_hermitian(0.0));
        let c = commutator(&q, &p);
        let h = (&q * &q + &p * &p) * C64::new(0.5, 0.0);
        for i in 0..m - 1 {
            for j in 0..m - 1 {
                let want = if i == j { C64::new(0.0, 1.0) } else { C64::new(0.0, 0.0) };
                prop_assert!((c[(i, j)] - want).norm() < 1e-12);
                let e = if i == j { i as f64 + 0.5 } else { 0.0 };
                prop_assert!((h[(i, j)].re - e).abs() < 1e-12 && h[(i, j)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn graded_automorphism(de in 0usize..6, dodd in 0usize..6, seed in any::<u64>()) {
        let g = GradedSpace::new(de, dodd);
        let d = g.dim();
        let mut r = rng(seed);
        let x = gaussian_matrix(d, d, &mut r);
        let y = gaussian_matrix(d, d, &mut r);
        prop_assert!((g.even_projector() + g.odd_projector() - identity(d)).frobenius() == 0.0);
        prop_assert!((tau(&tau(&x, &g).unwrap(), &g).unwrap() - &x).frobenius() == 0.0);
        let lhs = tau(&(&x * &y), &g).unwrap();
        let rhs = tau(&x, &g).unwrap() * tau(&y, &g).unwrap();
        prop_assert!((lhs - rhs).frobenius() <= 1e-13 * (1.0 + x.frobenius() * y.frobenius()));
        let (e, o) = (even_part(&x, &g).unwrap(), odd_part(&x, &g).unwrap());
        prop_assert!((&e + &o - &x).frobenius() == 0.0);
        // parts really are even and odd
        prop_assert!((tau(&e, &g).unwrap() - &e).frobenius() == 0.0);
        prop_assert!((tau(&o, &g).unwrap() + &o).frobenius() == 0.0);
    }

    #[test]
    fn exponential_of_hermitian_is_unitary(d in 1usize..24, t in -5.0f64..5.0, seed in any::<u64>()) {
        let h = random_hermitian(d, &mut rng(seed));
        prop_assert!(expm_hermitian(&h, t).is_unitary(1e-10));
    }

    #[test]
    fn spectrum_modes_orthonormal_and_stable(c1 in -0.02f64..0.02, c2 in 0.0f64..0.02) {
        let s = anharmonic_spectrum(c1, c2, 6, Some(64)).unwrap();
        let v = s.kept_modes();
        prop_assert!((v.adjoint() * &v - identity(6)).frobenius() < 1e-10);
        let finer = anharmonic_spectrum(c1, c2, 6, Some(96)).unwrap();
        for (a, b) in s.kept_energies().iter().zip(finer.kept_energies()) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        prop_assert!(s.eigen_residual(&build_h0(c1, c2, 64).unwrap()) < 1e-10);
    }

    #[test]
    fn pulse_transform_symmetry_and_continuity(coeffs in prop::collection::vec(-1.0f64..1.0, 1..4), horizon in 0.5f64..4.0, w in -6.0f64..6.0) {
        let mut c = coeffs.clone();
        if c.len() % 2 == 0 {
            c.push(0.1);
        }
        let p = ControlPulse::new(horizon, c).unwrap();
        // real pulse: conjugate symmetric transform
        prop_assert!((p.transform(-w) - p.transform(w).conj()).norm() < 1e-12);
        // continuity across the resonance branch
        let w0 = 2.0 * std::f64::consts::PI / horizon;
        for side in [-1e-9, 1e-9] {
            prop_assert!((p.transform(w0 + side) - p.transform(w0)).norm() <= 1e-7);
        }
    }

    #[test]
    fn dyson_gate_row_defect_is_quadratic(coeffs in prop::collection::vec(-1.0f64..1.0, 3)) {
        let spec = anharmonic_spectrum(0.03, 0.01, 4, None).unwrap();
        let p = ControlPulse::new(1.5, coeffs).unwrap();
        let defect = |eps: f64| {
            let g = dyson_gate(&spec, &p.scaled(eps)).unwrap();
            (g.adjoint() * &g - identity(4)).frobenius()
        };
        let (a, b) = (defect(1e-2), defect(5e-3));
        prop_assert!(a == 0.0 || (3.5..=4.5).contains(&(a / b)), "{a} {b}");
    }

    #[test]
    fn channel_two_paths_agree(seed in any::<u64>(), ds in 1usize..4, da in 1usize..4) {
        let mut r = rng(seed);
        let u = random_unitary(ds * da, &mut r);
        let anc = random_pure_state(da, &mut r);
        let ch = kraus_from_unitary(&u, ds, &anc).unwrap();
        let rho = random_density(ds, &mut r);
        let a = ch.apply(&rho).unwrap();
        let b = evolve_and_trace(&u, &rho, &anc).unwrap();
        prop_assert!((a - b).frobenius() < 1e-10);
        prop_assert!(ch.tp_defect() < 1e-10);
        assert_abs_diff_eq!(ch.choi().trace_c().re, ds as f64, epsilon = 1e-10);
    }

    #[test]
    fn channel_composition_matches_sequential_apply(seed in any::<u64>()) {
        let mut r = rng(seed);
        let first = kraus_from_unitary(&random_unitary(6, &mut r), 3, &random_pure_state(2, &mut r)).unwrap();
        let second = kraus_from_unitary(&random_unitary(6, &mut r), 3, &random_pure_state(2, &mut r)).unwrap();
        let rho = random_density(3, &mut r);
        let composed = second.compose_after(&first).unwrap();
        let seq = second.apply(&first.apply(&rho).unwrap()).unwrap();
        prop_assert!((composed.apply(&rho).unwrap() - seq).frobenius() < 1e-10);
        prop_assert!(composed.cp_defect() <= 1e-10);
    }

    #[test]
    fn vev_control_is_multilinear(seed in any::<u64>(), s in -2.0f64..2.0) {
        let mut r = rng(seed);
        let data: Vec<f64> = gaussian_matrix(1, 12, &mut r).iter().map(|z| z.re).collect();
        let d2 = Tensor::new(vec![2, 3, 2], data).unwrap();
        let p: Vec<f64> = vec![0.3, -0.7];
        let q: Vec<f64> = vec![1.1, 0.4];
        let base = vev_control(&VevControl { d2: d2.clone(), p_vev: p.clone(), q_vev: q.clone() }).unwrap();
        let scaled_p = vev_control(&VevControl { d2: d2.clone(), p_vev: p.iter().map(|x| x * s).collect(), q_vev: q.clone() }).unwrap();
        let scaled_q = vev_control(&VevControl { d2, p_vev: p, q_vev: q.iter().map(|x| x * s).collect() }).unwrap();
        for ((b, sp), sq) in base.iter().zip(&scaled_p).zip(&scaled_q) {
            prop_assert!((b * s - sp).abs() < 1e-12 && (b * s - sq).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_effective_hamiltonian_is_h0_plus_linear(c1 in -0.1f64..0.1, c2 in 0.0f64..0.1, a in -1.0f64..1.0) {
        let h = effective_hamiltonian(&GaugeCoefficients::single_mode(c1, c2, a), 16).unwrap();
        let want = build_h0(c1, c2, 16).unwrap() + position_op(16).unwrap() * C64::new(a, 0.0);
        prop_assert!(h == want);
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn synthesis_is_stationary_real_and_monotone(seed in any::<u64>()) {
        let spec = anharmonic_spectrum(0.1, 0.05, 3, None).unwrap();
        let target = random_unitary(3, &mut rng(seed));
        let prob = SynthesisProblem::new(target, spec, 10.0, 3, EnergyConstraint::Penalty(1e-2));
        let rep = synthesize(&prob).unwrap();
        prop_assert!(stationarity_residual(&prob, &rep).unwrap() < 1e-8);
        prop_assert!(rep.pulse.coeffs().iter().all(|c| c.is_finite()));
        let grid: Vec<f64> = (0..6).map(|i| 10f64.powi(i - 4)).collect();
        let reports = sweep(&prob, &grid).unwrap();
        for w in reports.windows(2) {
            prop_assert!(w[1].energy <= w[0].energy && w[1].residual >= w[0].residual);
        }
    }

    #[test]
    fn lindblad_keeps_trace_and_positivity(gamma in 0.0f64..2.0, omega in 0.0f64..3.0) {
        let model = LindbladModel::driven_damped_qubit(omega, gamma);
        let times = uniform_times(1.0, 1e-3).unwrap();
        let traj = lindblad_evolve(&model, model.rho0.as_ref().unwrap(), &times).unwrap();
        prop_assert!(traj.max_trace_drift <= 1e-10 * 1e-3);
        for s in &traj.states {
            prop_assert!(s.is_psd(1e-10));
        }
    }

    #[test]
    fn seeded_trajectories_are_identical(seed in any::<u64>()) {
        let model = LindbladModel::driven_damped_qubit(1.0, 0.5);
        let rho0: ComplexMatrix = model.rho0.clone().unwrap();
        let times = uniform_times(0.2, 1e-3).unwrap();
        let a = sme_simulate(&model, "gamma", 0.5, &rho0, &times, seed).unwrap();
        let b = sme_simulate(&model, "gamma", 0.5, &rho0, &times, seed).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
