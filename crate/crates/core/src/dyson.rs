//! Free propagator, control pulses and the first-order Dyson gate.
//!
//! With `U0(t) = sum_n exp(-i E_n t)|u_n><u_n|` the gate to first order in
//! the control is
//!
//! ```text
//! U(T) = U0(T) - i int_0^T b(t) U0(T - t) Q U0(t) dt
//! <u_n|U(T)|u_m> = delta_nm e^{-i E_n T} - i bhat(E_n - E_m) e^{-i E_n T} <u_n|Q|u_m>
//! ```
//!
//! where `bhat(w) = int_0^T b(t) e^{i w t} dt` is evaluated in closed form for
//! each harmonic basis function. The gate is affine in the pulse
//! coefficients, which [`DysonExpansion`] exposes directly.
//!
//! [`propagate_oracle`] is the independent reference: a midpoint-rule
//! product of exact short-time propagators at the full raw cutoff.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock;
use crate::matrix::{expm_hermitian, ComplexMatrix, OperatorExt, C64, I, ZERO};
use crate::spectrum::{build_h0, Spectrum};

/// Real pulse on `[0, T]`:
/// `b(t) = beta_0 + sum_k [beta_k^cos cos(2 pi k t/T) + beta_k^sin sin(2 pi k t/T)]`.
///
/// Coefficients are stored interleaved: `[beta_0, cos_1, sin_1, cos_2, sin_2, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "K")]
    harmonics: usize,
    coeffs: Vec<f64>,
}

/// `int_0^T e^{i x t} dt = T e^{i x T/2} sinc(x T/2)`, stable through `x = 0`.
fn window_transform(x: f64, horizon: f64) -> C64 {
    let half = 0.5 * x * horizon;
    let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
    C64::from_polar(horizon * sinc, half)
}

impl ControlPulse {
    pub fn new(horizon: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("pulse horizon must be positive, got {horizon}")));
        }
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::invalid(format!("pulse needs 2K+1 coefficients, got {}", coeffs.len())));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite pulse coefficient"));
        }
        let harmonics = (coeffs.len() - 1) / 2;
        Ok(ControlPulse { horizon, harmonics, coeffs })
    }

    pub fn zero(horizon: f64, harmonics: usize) -> Result<Self> {
        Self::new(horizon, vec![0.0; 2 * harmonics + 1])
    }

    /// Re-check invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        let checked = Self::new(self.horizon, self.coeffs.clone())?;
        if checked.harmonics != self.harmonics {
            return Err(Error::invalid(format!("K={} disagrees with {} coefficients", self.harmonics, self.coeffs.len())));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn n_params(&self) -> usize {
        self.coeffs.len()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ControlPulse { coeffs: self.coeffs.iter().map(|c| c * factor).collect(), ..self.clone() }
    }

    fn angular(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.horizon
    }

    /// Value of basis function `j` at time `t`.
    pub fn basis_eval(&self, j: usize, t: f64) -> f64 {
        basis_eval(self.horizon, j, t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(j, c)| c * self.basis_eval(j, t)).sum()
    }

    /// `int_0^T b(t)^2 dt = T (beta_0^2 + 1/2 sum_k (cos_k^2 + sin_k^2))`.
    pub fn energy(&self) -> f64 {
        energy_weights(self.horizon, self.harmonics)
            .iter()
            .zip(&self.coeffs)
            .map(|(w, c)| w * c * c)
            .sum()
    }

    /// Truncated Fourier transform `int_0^T b(t) e^{i w t} dt`.
    pub fn transform(&self, omega: f64) -> C64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| basis_transform(self.horizon, j, omega) * c)
            .sum()
    }

    pub fn max_frequency(&self) -> f64 {
        self.angular(self.harmonics)
    }
}

pub fn basis_eval(horizon: f64, j: usize, t: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let k = j.div_ceil(2);
    let arg = 2.0 * PI * k as f64 * t / horizon;
    if j % 2 == 1 {
        arg.cos()
    } else {
        arg.sin()
    }
}

/// Closed-form `int_0^T phi_j(t) e^{i w t} dt` for basis function `j`.
pub fn basis_transform(horizon: f64, j: usize, omega: f64) -> C64 {
    if j == 0 {
        return window_transform(omega, horizon);
    }
    let k = j.div_ceil(2);
    let big = 2.0 * PI * k as f64 / horizon;
    let up = window_transform(omega + big, horizon);
    let down = window_transform(omega - big, horizon);
    if j % 2 == 1 {
        (up + down) * 0.5
    } else {
        (up - down) / (2.0 * I)
    }
}

/// Diagonal of the pulse-energy quadratic form: `T diag(1, 1/2, ..., 1/2)`.
pub fn energy_weights(horizon: f64, harmonics: usize) -> Vec<f64> {
    (0..2 * harmonics + 1)
        .map(|j| if j == 0 { horizon } else { 0.5 * horizon })
        .collect()
}

/// `U0(t)` in the kept eigenbasis: `diag(exp(-i E_n t))`.
pub fn u0(spec: &Spectrum, t: f64) -> ComplexMatrix {
    let e = spec.kept_energies();
    ComplexMatrix::from_fn(e.len(), e.len(), |i, j| if i == j { C64::from_polar(1.0, -e[i] * t) } else { ZERO })
}

/// `U0(t)` rotated into the raw Fock basis through the kept modes.
pub fn u0_fock(spec: &Spectrum, t: f64) -> Result<ComplexMatrix> {
    spec.to_fock_basis(&u0(spec, t))
}

/// The Dyson gate split into its constant part and one first-order matrix
/// per pulse coefficient: `U(beta) = U0(T) + sum_j beta_j A_j`.
#[derive(Debug, Clone)]
pub struct DysonExpansion {
    pub horizon: f64,
    pub harmonics: usize,
    pub free: ComplexMatrix,
    pub first_order: Vec<ComplexMatrix>,
}

impl DysonExpansion {
    /// Expansion for the control operator `control` given in the kept eigenbasis.
    pub fn new(spec: &Spectrum, control: &ComplexMatrix, horizon: f64, harmonics: usize) -> Result<Self> {
        let d = spec.kept();
        if control.nrows() != d || control.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "dyson control operator",
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", control.nrows(), control.ncols()),
            });
        }
        if !(horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        let e = spec.kept_energies();
        let free = u0(spec, horizon);
        let first_order = (0..2 * harmonics + 1)
            .into_par_iter()
            .map(|j| {
                ComplexMatrix::from_fn(d, d, |n, m| {
                    let phase = C64::from_polar(1.0, -e[n] * horizon);
                    -I * basis_transform(horizon, j, e[n] - e[m]) * phase * control[(n, m)]
                })
            })
            .collect();
        Ok(DysonExpansion { horizon, harmonics, free, first_order })
    }

    /// Expansion for the oscillator's own control operator `Q`.
    pub fn for_position(spec: &Spectrum, horizon: f64, harmonics: usize) -> Result<Self> {
        Self::new(spec, &spec.position_in_eigenbasis()?, horizon, harmonics)
    }

    pub fn n_params(&self) -> usize {
        self.first_order.len()
    }

    pub fn gate(&self, coeffs: &[f64]) -> Result<ComplexMatrix> {
        if coeffs.len() != self.first_order.len() {
            return Err(Error::DimensionMismatch {
                context: "dyson coefficients",
                expected: format!("{}", self.first_order.len()),
                found: format!("{}", coeffs.len()),
            });
        }
        let mut g = self.free.clone();
        for (a, &c) in self.first_order.iter().zip(coeffs) {
            if c != 0.0 {
                g += a * C64::new(c, 0.0);
            }
        }
        Ok(g)
    }
}

/// First-order Dyson gate in the kept eigenbasis for the control `b(t) Q`.
pub fn dyson_gate(spec: &Spectrum, pulse: &ControlPulse) -> Result<ComplexMatrix> {
    dyson_gate_with(spec, &spec.position_in_eigenbasis()?, pulse)
}

/// First-order Dyson gate for an arbitrary control operator (kept eigenbasis).
pub fn dyson_gate_with(spec: &Spectrum, control: &ComplexMatrix, pulse: &ControlPulse) -> Result<ComplexMatrix> {
    let d = spec.kept();
    if control.nrows() != d || control.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "dyson control operator",
            expected: format!("{d}x{d}"),
            found: format!("{}x{}", control.nrows(), control.ncols()),
        });
    }
    let e = spec.kept_energies();
    let t = pulse.horizon();
    Ok(ComplexMatrix::from_fn(d, d, |n, m| {
        let phase = C64::from_polar(1.0, -e[n] * t);
        let free = if n == m { phase } else { ZERO };
        free - I * pulse.transform(e[n] - e[m]) * phase * control[(n, m)]
    }))
}

/// `max_n | sum_m |G_nm|^2 - 1 |`: how far a first-order gate is from unitary.
pub fn row_norm_defect(g: &ComplexMatrix) -> f64 {
    g.row_iter()
        .map(|row| (row.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Cauchy criterion on successive step doublings (Frobenius norm).
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { tol: 1e-8, max_steps: 1 << 18 }
    }
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    /// Propagator restricted to the kept eigenbasis.
    pub gate: ComplexMatrix,
    pub steps: usize,
    pub last_change: f64,
}

/// `prod_k exp(-i H(t_k^mid) dt)` over `steps` equal intervals, ordered with
/// later times to the left.
pub fn midpoint_product(h0: &ComplexMatrix, control: &ComplexMatrix, pulse: &ControlPulse, steps: usize) -> ComplexMatrix {
    let dt = pulse.horizon() / steps as f64;
    let n = h0.nrows();
    if h0.iter().chain(control.iter()).all(|z| z.im == 0.0) {
        return real_midpoint_product(&h0.map(|z| z.re), &control.map(|z| z.re), pulse, steps);
    }
    // rayon's reduce keeps neighbours adjacent, so the time ordering survives
    (0..steps)
        .into_par_iter()
        .map(|k| {
            let tm = (k as f64 + 0.5) * dt;
            let h = h0 + control * C64::new(pulse.eval(tm), 0.0);
            expm_hermitian(&h, dt)
        })
        .reduce(|| ComplexMatrix::identity(n, n), |earlier, later| later * earlier)
}

/// Unitary stored as separate real and imaginary parts.
#[derive(Clone)]
struct SplitUnitary {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl SplitUnitary {
    fn identity(n: usize) -> Self {
        SplitUnitary { re: DMatrix::identity(n, n), im: DMatrix::zeros(n, n) }
    }

    /// `self * rhs`, Gauss three-multiplication form.
    fn mul(&self, rhs: &SplitUnitary) -> SplitUnitary {
        let ac = &self.re * &rhs.re;
        let bd = &self.im * &rhs.im;
        let cross = (&self.re + &self.im) * (&rhs.re + &rhs.im);
        SplitUnitary { im: cross - &ac - &bd, re: ac - bd }
    }
}

/// `exp(-i h t)` for real symmetric `h` by Taylor series with scaling and squaring.
fn real_expm(h: &DMatrix<f64>, t: f64) -> SplitUnitary {
    let n = h.nrows();
    let norm = h.norm() * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = h * (t / 2f64.powi(squarings as i32));
    let mut out = SplitUnitary::identity(n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &a / k as f64;
        // (-i)^k cycles through -i, -1, i, 1
        match k % 4 {
            1 => out.im -= &term,
            2 => out.re -= &term,
            3 => out.im += &term,
            _ => out.re += &term,
        }
        if term.norm() < 1e-17 {
            break;
        }
    }
    for _ in 0..squarings {
        out = out.mul(&out);
    }
    out
}

fn real_midpoint_product(h0: &DMatrix<f64>, control: &DMatrix<f64>, pulse: &ControlPulse, steps: usize) -> ComplexMatrix {
    let dt = pulse.horizon() / steps as f64;
    let n = h0.nrows();
    let product = (0..steps)
        .into_par_iter()
        .map(|k| {
            let tm = (k as f64 + 0.5) * dt;
            real_expm(&(h0 + control * pulse.eval(tm)), dt)
        })
        .reduce(|| SplitUnitary::identity(n), |earlier, later| later.mul(&earlier));
    ComplexMatrix::from_fn(n, n, |i, j| C64::new(product.re[(i, j)], product.im[(i, j)]))
}

/// Brute-force time-ordered propagator of `H0 + b(t) Q` at the spectrum's raw
/// cutoff, projected onto the kept eigenbasis. Steps double from `steps`
/// until successive results differ by less than `opts.tol`.
pub fn propagate_oracle(spec: &Spectrum, pulse: &ControlPulse, steps: usize, opts: OracleOptions) -> Result<OracleOutcome> {
    let (c1, c2) = match (spec.c1, spec.c2) {
        (Some(c1), Some(c2)) => (c1, c2),
        _ => return Err(Error::invalid("propagate_oracle needs a spectrum built from anharmonic coefficients")),
    };
    let h0 = build_h0(c1, c2, spec.cutoff_raw)?;
    let q = fock::position_op(spec.cutoff_raw)?;
    propagate_oracle_with(spec, &h0, &q, pulse, steps, opts)
}

/// As [`propagate_oracle`] for an explicit raw-space `H0` and control operator.
pub fn propagate_oracle_with(
    spec: &Spectrum,
    h0: &ComplexMatrix,
    control: &ComplexMatrix,
    pulse: &ControlPulse,
    steps: usize,
    opts: OracleOptions,
) -> Result<OracleOutcome> {
    let mut steps = steps.max(1);
    let mut prev = spec.to_eigenbasis(&midpoint_product(h0, control, pulse, steps))?;
    let mut change = f64::INFINITY;
    while steps * 2 <= opts.max_steps {
        steps *= 2;
        let next = spec.to_eigenbasis(&midpoint_product(h0, control, pulse, steps))?;
        change = (&next - &prev).frobenius();
        prev = next;
        if change < opts.tol {
            return Ok(OracleOutcome { gate: prev, steps, last_change: change });
        }
    }
    Err(Error::OracleNotConverged { steps, change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::anharmonic_spectrum;

    fn pulse(horizon: f64, coeffs: &[f64]) -> ControlPulse {
        ControlPulse::new(horizon, coeffs.to_vec()).unwrap()
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn taylor_exponential_matches_eigendecomposition() {
        let h = build_h0(0.1, 0.05, 12).unwrap() + fock::position_op(12).unwrap() * C64::new(0.3, 0.0);
        for &t in &[1e-3, 0.2, 3.0] {
            let split = real_expm(&h.map(|z| z.re), t);
            let got = ComplexMatrix::from_fn(12, 12, |i, j| C64::new(split.re[(i, j)], split.im[(i, j)]));
            assert!((got - expm_hermitian(&h, t)).frobenius() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn pulse_validation() {
        assert!(ControlPulse::new(1.0, vec![0.0, 1.0]).is_err());
        assert!(ControlPulse::new(0.0, vec![0.0]).is_err());
        let p = pulse(2.0, &[0.1, 0.2, 0.3]);
        assert_eq!(p.harmonics(), 1);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"T\":2.0") && json.contains("\"K\":1"));
    }

    #[test]
    fn constant_pulse_transform() {
        let p = pulse(1.3, &[1.0]);
        assert!(close(p.transform(0.0), C64::new(1.3, 0.0), 1e-15));
        let w = 0.7;
        let want = (C64::from_polar(1.0, w * 1.3) - 1.0) / (I * w);
        assert!(close(p.transform(w), want, 1e-14));
    }

    #[test]
    fn transform_matches_quadrature() {
        let p = pulse(2.5, &[0.3, -0.2, 0.5, 0.1, 0.4]);
        for &w in &[0.0, 0.37, -1.9, 2.0 * PI / 2.5, 4.0 * PI / 2.5] {
            let n = 20000;
            let dt = p.horizon() / n as f64;
            let quad: C64 = (0..n)
                .map(|k| {
                    let t = (k as f64 + 0.5) * dt;
                    C64::from_polar(p.eval(t) * dt, w * t)
                })
                .sum();
            assert!(close(p.transform(w), quad, 1e-7), "w={w}");
        }
    }

    #[test]
    fn transform_continuity_at_resonance() {
        let p = pulse(3.0, &[0.2, 0.7, -0.4, 0.3, 0.9]);
        for k in 1..=2 {
            let w0 = 2.0 * PI * k as f64 / 3.0;
            for s in [-1.0, 1.0] {
                let delta = (p.transform(w0 + s * 1e-9) - p.transform(w0)).norm();
                assert!(delta <= 1e-7, "k={k} delta={delta}");
                let delta = (p.transform(-w0 + s * 1e-9) - p.transform(-w0)).norm();
                assert!(delta <= 1e-7);
            }
        }
    }

    #[test]
    fn energy_closed_form_matches_quadrature() {
        let p = pulse(1.7, &[0.3, -0.2, 0.5, 0.1, 0.4]);
        let n = 20000;
        let dt = p.horizon() / n as f64;
        let quad: f64 = (0..n).map(|k| p.eval((k as f64 + 0.5) * dt).powi(2) * dt).sum();
        assert!((p.energy() - quad).abs() < 1e-7);
    }

    #[test]
    fn free_propagator() {
        let spec = anharmonic_spectrum(0.0, 0.0, 4, Some(16)).unwrap();
        assert!((u0(&spec, 0.0) - ComplexMatrix::identity(4, 4)).frobenius() < 1e-15);
        let u = u0(&spec, 2.0 * PI);
        assert!((u + ComplexMatrix::identity(4, 4)).frobenius() < 1e-12);
        let spec = anharmonic_spectrum(0.02, 0.03, 4, None).unwrap();
        let lhs = u0(&spec, 0.4) * u0(&spec, 1.1);
        assert!((lhs - u0(&spec, 1.5)).frobenius() < 1e-13);
        assert!(u0_fock(&spec, 0.7).unwrap().nrows() == spec.cutoff_raw);
    }

    #[test]
    fn zero_pulse_gives_free_gate() {
        let spec = anharmonic_spectrum(0.03, 0.01, 3, None).unwrap();
        let g = dyson_gate(&spec, &ControlPulse::zero(1.5, 2).unwrap()).unwrap();
        assert_eq!(g, u0(&spec, 1.5));
    }

    #[test]
    fn harmonic_two_level_offdiagonal() {
        let spec = anharmonic_spectrum(0.0, 0.0, 2, Some(8)).unwrap();
        let beta = 0.3;
        let g = dyson_gate(&spec, &pulse(1.0, &[beta])).unwrap();
        // (e^{-iT} - 1)/(-i) with T = 1
        let integral = (C64::from_polar(1.0, -1.0) - 1.0) / (-I);
        let want = -I * beta * integral * C64::from_polar(1.0, -0.5) * std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(g[(0, 1)], want, 1e-14));
    }

    #[test]
    fn expansion_is_affine_and_matches_gate() {
        let spec = anharmonic_spectrum(0.02, 0.01, 3, None).unwrap();
        let exp = DysonExpansion::for_position(&spec, 2.0, 2).unwrap();
        let beta = [0.1, -0.05, 0.02, 0.07, -0.03];
        let direct = dyson_gate(&spec, &pulse(2.0, &beta)).unwrap();
        assert!((exp.gate(&beta).unwrap() - direct).frobenius() < 1e-14);
        let base = exp.gate(&beta).unwrap();
        for j in 0..5 {
            let mut shifted = beta;
            shifted[j] += 0.37;
            let fd = (exp.gate(&shifted).unwrap() - &base) / C64::new(0.37, 0.0);
            assert!((fd - &exp.first_order[j]).frobenius() < 1e-13);
        }
    }

    #[test]
    fn oracle_without_pulse_is_free_evolution() {
        let spec = anharmonic_spectrum(0.02, 0.01, 3, Some(24)).unwrap();
        let out = propagate_oracle(&spec, &ControlPulse::zero(1.0, 1).unwrap(), 4, OracleOptions::default()).unwrap();
        assert!((out.gate - u0(&spec, 1.0)).frobenius() < 1e-9);
    }
}
