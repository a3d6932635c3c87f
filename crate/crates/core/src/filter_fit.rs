//! Open-system dynamics under continuous homodyne monitoring.
//!
//! [`lindblad_evolve`] integrates the unconditional master equation,
//! [`sme_simulate`] produces a conditional trajectory together with its
//! measurement record, [`filter_estimate`] replays a record through a
//! (possibly wrong) model, and [`fit_parameters`] tunes the model so its
//! unconditional evolution tracks an estimated trajectory.
//!
//! All integrators are fixed-step so a given seed reproduces the same bytes.

use log::{debug, info, warn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{eigh, identity, serde_matrix, serde_matrix_vec, ComplexMatrix, OperatorExt, C64, I, ZERO};
use crate::random::rng;

/// Trace and positivity tolerances for stored states.
pub const TRACE_TOL: f64 = 1e-8;
pub const PSD_TOL: f64 = 1e-6;
/// Below this minimum eigenvalue the deterministic integrator gives up.
pub const POSITIVITY_FLOOR: f64 = -1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    pub name: String,
    #[serde(with = "serde_matrix")]
    pub operator: ComplexMatrix,
    pub value: f64,
    /// Present when the coefficient is a free parameter to be fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dissipator {
    pub name: String,
    /// Base operator; the jump operator is `sqrt(rate) * operator`.
    #[serde(with = "serde_matrix")]
    pub operator: ComplexMatrix,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

/// `H(theta) = H0 + sum_j theta_j B_j`, `L_k(theta) = sqrt(theta_k) L_k`.
///
/// Parameters are ordered Hamiltonian terms first, then dissipators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladModel {
    #[serde(with = "serde_matrix")]
    pub hamiltonian: ComplexMatrix,
    #[serde(default)]
    pub hamiltonian_terms: Vec<HamiltonianTerm>,
    #[serde(default)]
    pub dissipators: Vec<Dissipator>,
    /// Name of the monitored dissipator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_matrix")]
    pub rho0: Option<ComplexMatrix>,
}

mod opt_matrix {
    use crate::matrix::{ComplexMatrix, MatrixRecord};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<ComplexMatrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(MatrixRecord::from_matrix).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ComplexMatrix>, D::Error> {
        Option::<MatrixRecord>::deserialize(d)?
            .map(|r| r.to_matrix().map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub range: Option<[f64; 2]>,
    pub is_rate: bool,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexMatrix) -> Self {
        LindbladModel { hamiltonian, hamiltonian_terms: Vec::new(), dissipators: Vec::new(), measured: None, rho0: None }
    }

    /// Qubit with `H = (omega/2) sigma_x` and decay `sqrt(gamma) |0><1|`
    /// (monitored), starting in `|1>`.
    pub fn driven_damped_qubit(omega: f64, gamma: f64) -> Self {
        let sx = ComplexMatrix::from_row_slice(2, 2, &[ZERO, C64::new(0.5, 0.0), C64::new(0.5, 0.0), ZERO]);
        let lower = ComplexMatrix::from_row_slice(2, 2, &[ZERO, C64::new(1.0, 0.0), ZERO, ZERO]);
        let mut m = LindbladModel::new(ComplexMatrix::zeros(2, 2));
        m.hamiltonian_terms.push(HamiltonianTerm { name: "omega".into(), operator: sx, value: omega, range: None });
        m.dissipators.push(Dissipator { name: "gamma".into(), operator: lower, rate: gamma, range: None });
        m.measured = Some("gamma".into());
        m.rho0 = Some(crate::matrix::diag_real(&[0.0, 1.0]));
        m
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || !self.hamiltonian.is_square() {
            return Err(Error::invalid("model Hamiltonian must be a non-empty square matrix"));
        }
        let deviation = self.hamiltonian.hermitian_defect();
        if deviation > 1e-10 {
            return Err(Error::NotHermitian { deviation });
        }
        for t in &self.hamiltonian_terms {
            check_shape(&t.operator, d, "hamiltonian term")?;
            let deviation = t.operator.hermitian_defect();
            if deviation > 1e-10 {
                return Err(Error::NotHermitian { deviation });
            }
            if !t.value.is_finite() {
                return Err(Error::invalid(format!("term {} has a non-finite value", t.name)));
            }
        }
        for l in &self.dissipators {
            check_shape(&l.operator, d, "dissipator")?;
            if !(l.rate >= 0.0 && l.rate.is_finite()) {
                return Err(Error::invalid(format!("rate {} must be finite and >= 0", l.name)));
            }
        }
        for p in self.parameters() {
            if let Some([lo, hi]) = p.range {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) || (p.is_rate && lo < 0.0) {
                    return Err(Error::invalid(format!("bad range for {}: [{lo}, {hi}]", p.name)));
                }
            }
        }
        if let Some(name) = &self.measured {
            self.dissipator_index(name)?;
        }
        if let Some(rho) = &self.rho0 {
            check_density(rho, d)?;
        }
        Ok(())
    }

    pub fn dissipator_index(&self, name: &str) -> Result<usize> {
        self.dissipators
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::invalid(format!("no dissipator named {name}")))
    }

    pub fn parameters(&self) -> Vec<Parameter> {
        let h = self.hamiltonian_terms.iter().map(|t| Parameter { name: t.name.clone(), value: t.value, range: t.range, is_rate: false });
        let l = self.dissipators.iter().map(|l| Parameter { name: l.name.clone(), value: l.rate, range: l.range, is_rate: true });
        h.chain(l).collect()
    }

    /// Indices into [`LindbladModel::parameters`] of the parameters with a range.
    pub fn free_parameters(&self) -> Vec<usize> {
        self.parameters().iter().enumerate().filter(|(_, p)| p.range.is_some()).map(|(i, _)| i).collect()
    }

    pub fn with_parameter(&self, index: usize, value: f64) -> Result<LindbladModel> {
        let mut m = self.clone();
        let nh = m.hamiltonian_terms.len();
        if index < nh {
            m.hamiltonian_terms[index].value = value;
        } else if let Some(l) = m.dissipators.get_mut(index - nh) {
            if value < 0.0 {
                return Err(Error::invalid(format!("rate {} must be >= 0, got {value}", l.name)));
            }
            l.rate = value;
        } else {
            return Err(Error::invalid(format!("parameter index {index} out of range")));
        }
        Ok(m)
    }

    pub fn with_free(&self, free: &[usize], values: &[f64]) -> Result<LindbladModel> {
        let mut m = self.clone();
        for (&i, &v) in free.iter().zip(values) {
            m = m.with_parameter(i, v)?;
        }
        Ok(m)
    }

    pub fn total_hamiltonian(&self) -> ComplexMatrix {
        let mut h = self.hamiltonian.clone();
        for t in &self.hamiltonian_terms {
            h += &t.operator * C64::new(t.value, 0.0);
        }
        h
    }

    pub fn jump_operators(&self) -> Vec<ComplexMatrix> {
        self.dissipators.iter().map(|l| &l.operator * C64::new(l.rate.sqrt(), 0.0)).collect()
    }

    pub fn generator(&self) -> Generator {
        Generator::new(self.total_hamiltonian(), self.jump_operators())
    }
}

fn check_shape(m: &ComplexMatrix, d: usize, context: &'static str) -> Result<()> {
    if m.shape() != (d, d) {
        return Err(Error::DimensionMismatch { context, expected: format!("{d}x{d}"), found: format!("{}x{}", m.nrows(), m.ncols()) });
    }
    Ok(())
}

fn check_density(rho: &ComplexMatrix, d: usize) -> Result<()> {
    check_shape(rho, d, "density matrix")?;
    if rho.hermitian_defect() > TRACE_TOL {
        return Err(Error::invalid("density matrix is not Hermitian"));
    }
    if (rho.trace().re - 1.0).abs() > TRACE_TOL {
        return Err(Error::invalid(format!("density matrix trace {} != 1", rho.trace().re)));
    }
    if !rho.is_psd(PSD_TOL) {
        return Err(Error::invalid("density matrix is not positive semidefinite"));
    }
    Ok(())
}

/// Precomputed pieces of `D(rho) = -i[H, rho] + sum_k (L rho L^H - {L^H L, rho}/2)`.
#[derive(Debug, Clone)]
pub struct Generator {
    /// `-i H - (1/2) sum L^H L`, so the no-jump part is `K rho + rho K^H`.
    effective: ComplexMatrix,
    jumps: Vec<(ComplexMatrix, ComplexMatrix)>,
}

impl Generator {
    pub fn new(h: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Self {
        let d = h.nrows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for l in &jumps {
            sum += l.adjoint() * l;
        }
        let effective = h * (-I) - sum * C64::new(0.5, 0.0);
        Generator { effective, jumps: jumps.into_iter().map(|l| { let a = l.adjoint(); (l, a) }).collect() }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let k_rho = &self.effective * rho;
        let mut out = &k_rho + k_rho.adjoint();
        for (l, ld) in &self.jumps {
            out += l * rho * ld;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(with = "serde_matrix_vec")]
    pub states: Vec<ComplexMatrix>,
    /// Homodyne increments `dY`, one per step (`times.len() - 1` entries).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Largest per-step `|tr rho - 1|` before renormalization.
    #[serde(default)]
    pub max_trace_drift: f64,
    /// Total weight removed by eigenvalue clipping.
    #[serde(default)]
    pub clipped: f64,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.states.len() {
            return Err(Error::GridMismatch(format!("{} times but {} states", self.times.len(), self.states.len())));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridMismatch("times must be strictly ascending".into()));
        }
        if let Some(rec) = &self.record {
            if rec.len() + 1 != self.times.len() {
                return Err(Error::GridMismatch(format!("record has {} increments for {} times", rec.len(), self.times.len())));
            }
        }
        let d = self.states.first().map_or(0, |s| s.nrows());
        self.states.iter().try_for_each(|s| check_density(s, d))
    }

    pub fn final_state(&self) -> Option<&ComplexMatrix> {
        self.states.last()
    }

    /// `(t, dY)` rows; the increment on `[t_k, t_{k+1}]` is stamped `t_{k+1}`.
    pub fn record_rows(&self) -> Vec<(f64, f64)> {
        match &self.record {
            Some(rec) => self.times[1..].iter().copied().zip(rec.iter().copied()).collect(),
            None => Vec::new(),
        }
    }
}

/// `t0, t0 + dt, ..., t0 + n dt` with `n = round(horizon / dt)`.
pub fn uniform_times(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite() && horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("need dt > 0 and T > 0 (dt={dt}, T={horizon})")));
    }
    let n = (horizon / dt).round() as usize;
    if n == 0 {
        return Err(Error::invalid("T must be at least one step"));
    }
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

fn grid_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::GridMismatch("time grid needs at least two points".into()));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::GridMismatch("times must be ascending".into()));
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::GridMismatch(format!("non-uniform spacing at index {k}")));
        }
    }
    Ok(dt)
}

fn renormalize(rho: &mut ComplexMatrix) -> f64 {
    let tr = rho.trace().re;
    *rho /= C64::new(tr, 0.0);
    // restore exact Hermiticity lost to rounding
    let sym = (&*rho + rho.adjoint()) * C64::new(0.5, 0.0);
    *rho = sym;
    (tr - 1.0).abs()
}

/// RK4 on the master equation with `substeps` integrator steps per grid interval.
pub fn lindblad_evolve_substeps(model: &LindbladModel, rho0: &ComplexMatrix, times: &[f64], substeps: usize) -> Result<Trajectory> {
    model.validate()?;
    check_density(rho0, model.dim())?;
    let dt = grid_step(times)? / substeps.max(1) as f64;
    let gen = model.generator();
    let half = C64::new(dt / 2.0, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);

    let mut rho = rho0.clone();
    let mut states = Vec::with_capacity(times.len());
    states.push(rho.clone());
    let mut max_drift = 0.0f64;
    for &t in &times[1..] {
        for _ in 0..substeps.max(1) {
            let k1 = gen.apply(&rho);
            let k2 = gen.apply(&(&rho + &k1 * half));
            let k3 = gen.apply(&(&rho + &k2 * half));
            let k4 = gen.apply(&(&rho + &k3 * full));
            rho += (k1 + (k2 + k3) * two + k4) * sixth;
            max_drift = max_drift.max(renormalize(&mut rho));
        }
        let min_eig = eigh(&rho).0[0];
        if !min_eig.is_finite() || min_eig < POSITIVITY_FLOOR {
            return Err(Error::StepSize { t, min_eig });
        }
        states.push(rho.clone());
    }
    debug!("lindblad_evolve: max per-step trace drift {max_drift:.3e}");
    Ok(Trajectory { times: times.to_vec(), states, record: None, seed: None, max_trace_drift: max_drift, clipped: 0.0 })
}

pub fn lindblad_evolve(model: &LindbladModel, rho0: &ComplexMatrix, times: &[f64]) -> Result<Trajectory> {
    lindblad_evolve_substeps(model, rho0, times, 1)
}

/// Nearest PSD trace-one matrix by clipping negative eigenvalues.
/// Returns the clipped weight.
fn project_density(rho: &mut ComplexMatrix) -> f64 {
    let herm = (&*rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let (values, vectors) = eigh(&herm);
    let clipped: f64 = values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    if clipped == 0.0 {
        *rho = herm;
        renormalize(rho);
        return 0.0;
    }
    let kept: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = kept.iter().sum();
    let d = rho.nrows();
    let scaled = ComplexMatrix::from_fn(d, d, |i, j| vectors[(i, j)] * (kept[j] / total));
    *rho = &scaled * vectors.adjoint();
    clipped
}

struct Monitor {
    gen: Generator,
    meas: ComplexMatrix,
    meas_sum: ComplexMatrix,
    sqrt_eta: f64,
    dt: f64,
}

impl Monitor {
    fn new(model: &LindbladModel, meas: &str, eta: f64, times: &[f64]) -> Result<Self> {
        model.validate()?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::invalid(format!("efficiency must lie in (0, 1], got {eta}")));
        }
        let k = model.dissipator_index(meas)?;
        let meas = model.jump_operators().swap_remove(k);
        let meas_sum = &meas + meas.adjoint();
        Ok(Monitor { gen: model.generator(), meas, meas_sum, sqrt_eta: eta.sqrt(), dt: grid_step(times)? })
    }

    /// `sqrt(eta) tr((L + L^H) rho)`
    fn signal(&self, rho: &ComplexMatrix) -> f64 {
        self.sqrt_eta * (&self.meas_sum * rho).trace().re
    }

    /// One Euler-Maruyama step driven by the innovation `dw`.
    fn step(&self, rho: &ComplexMatrix, dw: f64) -> ComplexMatrix {
        let mean = self.signal(rho);
        let l_rho = &self.meas * rho;
        let kick = (&l_rho + l_rho.adjoint() - rho * C64::new(mean / self.sqrt_eta, 0.0)) * C64::new(self.sqrt_eta * dw, 0.0);
        rho + self.gen.apply(rho) * C64::new(self.dt, 0.0) + kick
    }
}

/// Conditional evolution under homodyne detection of the named dissipator.
pub fn sme_simulate(model: &LindbladModel, meas: &str, eta: f64, rho0: &ComplexMatrix, times: &[f64], seed: u64) -> Result<Trajectory> {
    let mon = Monitor::new(model, meas, eta, times)?;
    check_density(rho0, model.dim())?;
    let mut gen = rng(seed);
    let sqrt_dt = mon.dt.sqrt();
    let mut rho = rho0.clone();
    let mut states = Vec::with_capacity(times.len());
    let mut record = Vec::with_capacity(times.len() - 1);
    states.push(rho.clone());
    let mut clipped = 0.0;
    let mut drift = 0.0f64;
    for _ in 1..times.len() {
        let dw = sqrt_dt * gen.sample::<f64, _>(StandardNormal);
        record.push(mon.signal(&rho) * mon.dt + dw);
        rho = mon.step(&rho, dw);
        drift = drift.max((rho.trace().re - 1.0).abs());
        clipped += project_density(&mut rho);
        states.push(rho.clone());
    }
    if clipped > 0.0 {
        debug!("sme_simulate: clipped total eigenvalue weight {clipped:.3e}");
    }
    Ok(Trajectory { times: times.to_vec(), states, record: Some(record), seed: Some(seed), max_trace_drift: drift, clipped })
}

/// Quantum filter: the conditional state implied by `record` under `model`.
pub fn filter_estimate(model: &LindbladModel, record: &[f64], meas: &str, eta: f64, rho0: &ComplexMatrix, times: &[f64]) -> Result<Trajectory> {
    let mon = Monitor::new(model, meas, eta, times)?;
    check_density(rho0, model.dim())?;
    if record.len() + 1 != times.len() {
        return Err(Error::GridMismatch(format!("record has {} increments for {} times", record.len(), times.len())));
    }
    let mut rho = rho0.clone();
    let mut states = Vec::with_capacity(times.len());
    states.push(rho.clone());
    let mut clipped = 0.0;
    let mut drift = 0.0f64;
    for &dy in record {
        let innovation = dy - mon.signal(&rho) * mon.dt;
        rho = mon.step(&rho, innovation);
        drift = drift.max((rho.trace().re - 1.0).abs());
        clipped += project_density(&mut rho);
        states.push(rho.clone());
    }
    Ok(Trajectory { times: times.to_vec(), states, record: Some(record.to_vec()), seed: None, max_trace_drift: drift, clipped })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    #[serde(with = "serde_matrix_vec")]
    pub mean: Vec<ComplexMatrix>,
    /// Per-entry sample variance of the mean, summed over entries.
    pub mean_variance: Vec<f64>,
    pub runs: usize,
}

impl EnsembleStats {
    /// Standard error of the Frobenius distance of the mean from a reference.
    pub fn standard_error(&self, k: usize) -> f64 {
        self.mean_variance[k].sqrt()
    }
}

/// Average of `runs` trajectories with seeds `master_seed, master_seed + 1, ...`
/// at the given grid indices.
pub fn sme_ensemble(model: &LindbladModel, meas: &str, eta: f64, rho0: &ComplexMatrix, times: &[f64], checkpoints: &[usize], runs: usize, master_seed: u64) -> Result<EnsembleStats> {
    if runs < 2 {
        return Err(Error::invalid("ensemble needs at least two runs"));
    }
    if let Some(&bad) = checkpoints.iter().find(|&&k| k >= times.len()) {
        return Err(Error::invalid(format!("checkpoint {bad} outside the grid")));
    }
    let samples: Vec<Vec<ComplexMatrix>> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let traj = sme_simulate(model, meas, eta, rho0, times, master_seed.wrapping_add(i))?;
            Ok(checkpoints.iter().map(|&k| traj.states[k].clone()).collect())
        })
        .collect::<Result<_>>()?;
    let n = runs as f64;
    let d = model.dim();
    let mut mean = Vec::with_capacity(checkpoints.len());
    let mut mean_variance = Vec::with_capacity(checkpoints.len());
    for c in 0..checkpoints.len() {
        let mut m = ComplexMatrix::zeros(d, d);
        for s in &samples {
            m += &s[c];
        }
        m /= C64::new(n, 0.0);
        let var: f64 = samples.iter().map(|s| (&s[c] - &m).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>() / (n - 1.0);
        mean.push(m);
        mean_variance.push(var / n);
    }
    Ok(EnsembleStats { times: checkpoints.iter().map(|&k| times[k]).collect(), mean, mean_variance, runs })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitOptions {
    /// Grid points per free parameter in the coarse scan.
    pub grid_points: usize,
    /// Golden-section stops when the bracket is narrower than this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Integrator steps per grid interval of the estimate.
    pub substeps: usize,
    /// Use every `stride`-th stored time as a checkpoint.
    pub stride: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { grid_points: 20, tol: 1e-7, max_sweeps: 20, substeps: 1, stride: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostPoint {
    pub theta: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub theta: Vec<f64>,
    pub cost: f64,
    /// Every evaluated point, grid scan first, in evaluation order.
    pub curve: Vec<CostPoint>,
    pub skipped: usize,
}

impl FitResult {
    pub fn fitted_model(&self, family: &LindbladModel) -> Result<LindbladModel> {
        family.with_free(&family.free_parameters(), &self.theta)
    }
}

/// `sum_k ||rho_theta(t_k) - rho_est(t_k)||_F^2` over the checkpoints.
pub fn fit_cost(est: &Trajectory, model: &LindbladModel, opts: &FitOptions) -> Result<f64> {
    let traj = lindblad_evolve_substeps(model, &est.states[0], &est.times, opts.substeps)?;
    Ok(traj
        .states
        .iter()
        .zip(&est.states)
        .step_by(opts.stride.max(1))
        .map(|(a, b)| (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![(lo + hi) / 2.0];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Grid scan over the free parameters of `family`, then coordinate-wise
/// golden-section refinement around the best grid point.
pub fn fit_parameters(est: &Trajectory, family: &LindbladModel, opts: FitOptions) -> Result<FitResult> {
    family.validate()?;
    est.validate()?;
    grid_step(&est.times)?;
    let free = family.free_parameters();
    if free.is_empty() || opts.grid_points == 0 {
        return Err(Error::EmptyGrid);
    }
    let params = family.parameters();
    let ranges: Vec<[f64; 2]> = free.iter().map(|&i| params[i].range.unwrap()).collect();
    let axes: Vec<Vec<f64>> = ranges.iter().map(|r| linspace(r[0], r[1], opts.grid_points)).collect();

    let total: usize = axes.iter().map(Vec::len).product();
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut flat| {
            axes.iter()
                .map(|axis| {
                    let v = axis[flat % axis.len()];
                    flat /= axis.len();
                    v
                })
                .collect()
        })
        .collect();

    let eval = |theta: &[f64]| -> f64 {
        match family.with_free(&free, theta).and_then(|m| fit_cost(est, &m, &opts)) {
            Ok(c) if c.is_finite() => c,
            Ok(_) | Err(_) => {
                warn!("fit: skipping theta={theta:?} (integration failed or cost not finite)");
                f64::INFINITY
            }
        }
    };

    let costs: Vec<f64> = points.par_iter().map(|p| eval(p)).collect();
    let mut curve: Vec<CostPoint> = points.iter().zip(&costs).map(|(p, &c)| CostPoint { theta: p.clone(), cost: c }).collect();
    let mut skipped = costs.iter().filter(|c| !c.is_finite()).count();
    let best_idx = costs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(Error::EmptyGrid)?;
    let mut theta = points[best_idx].clone();
    let mut best = costs[best_idx];
    info!("fit: grid best {theta:?} cost {best:.3e}");

    let spacing: Vec<f64> = axes.iter().zip(&ranges).map(|(a, r)| if a.len() > 1 { a[1] - a[0] } else { r[1] - r[0] }).collect();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..opts.max_sweeps {
        let before = theta.clone();
        for j in 0..theta.len() {
            let mut lo = (theta[j] - spacing[j]).max(ranges[j][0]);
            let mut hi = (theta[j] + spacing[j]).min(ranges[j][1]);
            let probe = |x: f64, theta: &[f64], curve: &mut Vec<CostPoint>, skipped: &mut usize| -> f64 {
                let mut t = theta.to_vec();
                t[j] = x;
                let c = eval(&t);
                if !c.is_finite() {
                    *skipped += 1;
                }
                curve.push(CostPoint { theta: t, cost: c });
                c
            };
            let mut x1 = hi - inv_phi * (hi - lo);
            let mut x2 = lo + inv_phi * (hi - lo);
            let mut f1 = probe(x1, &theta, &mut curve, &mut skipped);
            let mut f2 = probe(x2, &theta, &mut curve, &mut skipped);
            while hi - lo > opts.tol {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - inv_phi * (hi - lo);
                    f1 = probe(x1, &theta, &mut curve, &mut skipped);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + inv_phi * (hi - lo);
                    f2 = probe(x2, &theta, &mut curve, &mut skipped);
                }
            }
            let (x, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
            if f < best {
                best = f;
                theta[j] = x;
            }
        }
        let moved = theta.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved <= opts.tol {
            break;
        }
    }
    Ok(FitResult { names: free.iter().map(|&i| params[i].name.clone()).collect(), theta, cost: best, curve, skipped })
}

/// Purity `tr(rho^2)`.
pub fn purity(rho: &ComplexMatrix) -> f64 {
    (rho * rho).trace().re
}

pub fn frobenius_gap(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).frobenius()
}

/// Maximally mixed state.
pub fn mixed_state(d: usize) -> ComplexMatrix {
    identity(d) / C64::new(d as f64, 0.0)
}
