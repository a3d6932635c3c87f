//! TPCP maps from unitary evolution of system (x) ancilla followed by a
//! partial trace over the ancilla, their Choi matrices, and pulse design
//! against a target channel.
//!
//! Tensor ordering is `system (x) ancilla`: joint index `i_sys * d_anc + i_anc`.
//! Choi matrices are `J = sum_ij |i><j| (x) Phi(|i><j|)`, input factor first.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dyson::{energy_weights, ControlPulse, DysonExpansion};
use crate::error::{Error, Result};
use crate::fock;
use crate::matrix::{diag_real, eigvalsh, identity, kron, ComplexMatrix, ComplexVector, OperatorExt, C64};
use crate::spectrum::{diagonalize, Spectrum};

pub const TP_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    kraus: Vec<ComplexMatrix>,
    d_in: usize,
    d_out: usize,
}

/// Which tensor factor to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    System,
    Ancilla,
}

impl QuantumChannel {
    /// Kraus operators must share one `d_out x d_in` shape. Trace
    /// preservation is not enforced here; see [`QuantumChannel::validate`].
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::invalid("channel needs at least one Kraus operator"))?;
        let (d_out, d_in) = first.shape();
        if d_in == 0 || d_out == 0 {
            return Err(Error::invalid("Kraus operators must be non-empty"));
        }
        if let Some(bad) = kraus.iter().find(|k| k.shape() != (d_out, d_in)) {
            return Err(Error::DimensionMismatch {
                context: "kraus operators",
                expected: format!("{d_out}x{d_in}"),
                found: format!("{}x{}", bad.nrows(), bad.ncols()),
            });
        }
        Ok(QuantumChannel { kraus, d_in, d_out })
    }

    pub fn identity(d: usize) -> Self {
        QuantumChannel { kraus: vec![identity(d)], d_in: d, d_out: d }
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// `max |sum K^H K - I|`.
    pub fn tp_defect(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.d_in, self.d_in);
        for k in &self.kraus {
            sum += k.adjoint() * k;
        }
        (sum - identity(self.d_in)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max(0, -lambda_min(J))`.
    pub fn cp_defect(&self) -> f64 {
        (-eigvalsh(&self.choi()).first().copied().unwrap_or(0.0)).max(0.0)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let tp = self.tp_defect();
        if tp > tol {
            return Err(Error::invalid(format!("channel not trace preserving (defect {tp:.3e})")));
        }
        let cp = self.cp_defect();
        if cp > tol {
            return Err(Error::invalid(format!("Choi matrix not PSD (min eigenvalue {:.3e})", -cp)));
        }
        Ok(())
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.shape() != (self.d_in, self.d_in) {
            return Err(Error::DimensionMismatch {
                context: "apply_channel",
                expected: format!("{0}x{0}", self.d_in),
                found: format!("{}x{}", rho.nrows(), rho.ncols()),
            });
        }
        let mut out = ComplexMatrix::zeros(self.d_out, self.d_out);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }

    pub fn choi(&self) -> ComplexMatrix {
        choi_from_kraus(&self.kraus, self.d_in, self.d_out)
    }

    /// `self` after `first`: Kraus set `{A_i B_j}`.
    pub fn compose_after(&self, first: &QuantumChannel) -> Result<QuantumChannel> {
        if first.d_out != self.d_in {
            return Err(Error::DimensionMismatch {
                context: "channel composition",
                expected: format!("{}", self.d_in),
                found: format!("{}", first.d_out),
            });
        }
        let kraus = self
            .kraus
            .iter()
            .flat_map(|a| first.kraus.iter().map(move |b| a * b))
            .collect();
        QuantumChannel::new(kraus)
    }
}

fn choi_from_kraus(kraus: &[ComplexMatrix], d_in: usize, d_out: usize) -> ComplexMatrix {
    let n = d_in * d_out;
    let mut j = ComplexMatrix::zeros(n, n);
    for k in kraus {
        // vec_k[(i, a)] = K[a, i]
        let v = ComplexVector::from_fn(n, |idx, _| k[(idx % d_out, idx / d_out)]);
        j += &v * v.adjoint();
    }
    j
}

pub fn apply_channel(ch: &QuantumChannel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    ch.apply(rho)
}

pub fn choi(ch: &QuantumChannel) -> ComplexMatrix {
    ch.choi()
}

/// `||J1 - J2||_F`.
pub fn channel_distance(a: &QuantumChannel, b: &QuantumChannel) -> Result<f64> {
    if (a.d_in, a.d_out) != (b.d_in, b.d_out) {
        return Err(Error::DimensionMismatch {
            context: "channel_distance",
            expected: format!("{}->{}", a.d_in, a.d_out),
            found: format!("{}->{}", b.d_in, b.d_out),
        });
    }
    Ok((a.choi() - b.choi()).frobenius())
}

/// Partial trace of an operator on `d_sys (x) d_anc` over the named factor.
pub fn partial_trace(rho: &ComplexMatrix, dims: (usize, usize), over: Factor) -> Result<ComplexMatrix> {
    let (ds, da) = dims;
    if rho.shape() != (ds * da, ds * da) || ds == 0 || da == 0 {
        return Err(Error::DimensionMismatch {
            context: "partial_trace",
            expected: format!("{0}x{0}", ds * da),
            found: format!("{}x{}", rho.nrows(), rho.ncols()),
        });
    }
    if (rho.trace().re - 1.0).abs() > 1e-8 || rho.hermitian_defect() > 1e-8 {
        warn!("partial_trace input is not a normalized Hermitian state");
    }
    Ok(match over {
        Factor::Ancilla => ComplexMatrix::from_fn(ds, ds, |i, j| (0..da).map(|k| rho[(i * da + k, j * da + k)]).sum()),
        Factor::System => ComplexMatrix::from_fn(da, da, |a, b| (0..ds).map(|k| rho[(k * da + a, k * da + b)]).sum()),
    })
}

/// `K_i = (I (x) <i|) M (I (x) |a>)` for an arbitrary joint operator `M`.
fn kraus_of(m: &ComplexMatrix, d_sys: usize, d_anc: usize, anc_state: &ComplexVector) -> Vec<ComplexMatrix> {
    (0..d_anc)
        .map(|i| {
            ComplexMatrix::from_fn(d_sys, d_sys, |r, c| {
                (0..d_anc).map(|k| m[(r * d_anc + i, c * d_anc + k)] * anc_state[k]).sum()
            })
        })
        .collect()
}

fn check_anc_state(anc_state: &ComplexVector, d_anc: usize) -> Result<()> {
    if anc_state.len() != d_anc {
        return Err(Error::DimensionMismatch {
            context: "ancilla state",
            expected: format!("{d_anc}"),
            found: format!("{}", anc_state.len()),
        });
    }
    let norm = anc_state.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("ancilla state must be normalized (norm {norm})")));
    }
    Ok(())
}

/// Channel on the system obtained from a joint unitary with the ancilla
/// prepared in `anc_state`.
pub fn kraus_from_unitary(u: &ComplexMatrix, d_sys: usize, anc_state: &ComplexVector) -> Result<QuantumChannel> {
    let d_anc = anc_state.len();
    if u.shape() != (d_sys * d_anc, d_sys * d_anc) {
        return Err(Error::DimensionMismatch {
            context: "kraus_from_unitary",
            expected: format!("{0}x{0}", d_sys * d_anc),
            found: format!("{}x{}", u.nrows(), u.ncols()),
        });
    }
    let deviation = u.unitary_defect();
    if deviation > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    check_anc_state(anc_state, d_anc)?;
    QuantumChannel::new(kraus_of(u, d_sys, d_anc, anc_state))
}

/// Reference path: `tr_anc(U (rho (x) |a><a|) U^H)`.
pub fn evolve_and_trace(u: &ComplexMatrix, rho: &ComplexMatrix, anc_state: &ComplexVector) -> Result<ComplexMatrix> {
    let d_anc = anc_state.len();
    let d_sys = rho.nrows();
    let joint = kron(rho, &(anc_state * anc_state.adjoint()));
    if u.shape() != joint.shape() {
        return Err(Error::DimensionMismatch {
            context: "evolve_and_trace",
            expected: format!("{0}x{0}", joint.nrows()),
            found: format!("{}x{}", u.nrows(), u.ncols()),
        });
    }
    partial_trace(&(u * joint * u.adjoint()), (d_sys, d_anc), Factor::Ancilla)
}

/// System in its kept eigenbasis coupled to a small ancilla standing in for
/// the unobserved superpartner sector:
///
/// `H = diag(E) (x) I + I (x) diag(0, w, 2w, ...) + g Q (x) Q_anc`,
///
/// with the control `b(t) Q (x) I`.
#[derive(Debug, Clone)]
pub struct JointSystem {
    pub d_sys: usize,
    pub d_anc: usize,
    pub anc_freq: f64,
    pub coupling: f64,
    /// Joint Hamiltonian in the product basis.
    pub hamiltonian: ComplexMatrix,
    /// Control operator in the product basis.
    pub control: ComplexMatrix,
    /// Exact diagonalization of the joint Hamiltonian (nothing truncated).
    pub spectrum: Spectrum,
}

impl JointSystem {
    pub fn new(system: &Spectrum, d_anc: usize, anc_freq: f64, coupling: f64) -> Result<Self> {
        if d_anc == 0 {
            return Err(Error::invalid("ancilla dimension must be >= 1"));
        }
        let d_sys = system.kept();
        let q_sys = system.position_in_eigenbasis()?;
        let h_sys = diag_real(system.kept_energies());
        let h_anc = diag_real(&(0..d_anc).map(|k| k as f64 * anc_freq).collect::<Vec<_>>());
        let q_anc = if d_anc >= 2 { fock::position_op(d_anc)? } else { ComplexMatrix::zeros(1, 1) };
        let hamiltonian = kron(&h_sys, &identity(d_anc)) + kron(&identity(d_sys), &h_anc) + kron(&q_sys, &q_anc) * C64::new(coupling, 0.0);
        let control = kron(&q_sys, &identity(d_anc));
        let spectrum = diagonalize(&hamiltonian, d_sys * d_anc)?;
        Ok(JointSystem { d_sys, d_anc, anc_freq, coupling, hamiltonian, control, spectrum })
    }

    /// Ground state of the bare ancilla, `|0>`.
    pub fn ancilla_ground(&self) -> ComplexVector {
        crate::matrix::basis_vector(self.d_anc, 0)
    }

    /// First-order joint gate, in the product basis, as an affine map of the pulse.
    pub fn expansion(&self, horizon: f64, harmonics: usize) -> Result<DysonExpansion> {
        let v = &self.spectrum.modes;
        let control_eig = v.adjoint() * &self.control * v;
        let exp = DysonExpansion::new(&self.spectrum, &control_eig, horizon, harmonics)?;
        let rotate = |m: &ComplexMatrix| v * m * v.adjoint();
        Ok(DysonExpansion {
            horizon,
            harmonics,
            free: rotate(&exp.free),
            first_order: exp.first_order.iter().map(rotate).collect(),
        })
    }
}

/// Channel realized by the first-order joint gate (not exactly TP).
pub fn realized_channel(joint: &JointSystem, pulse: &ControlPulse, anc_state: &ComplexVector) -> Result<QuantumChannel> {
    check_anc_state(anc_state, joint.d_anc)?;
    let gate = joint.expansion(pulse.horizon(), pulse.harmonics())?.gate(pulse.coeffs())?;
    QuantumChannel::new(kraus_of(&gate, joint.d_sys, joint.d_anc, anc_state))
}

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals: usize,
    /// Stop early once the Choi distance drops below this.
    pub target_distance: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { initial_step: 0.05, min_step: 1e-12, max_evals: 400_000, target_distance: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelReport {
    pub pulse: ControlPulse,
    pub choi_distance: f64,
    pub objective: f64,
    pub energy: f64,
    pub tp_defect: f64,
    pub cp_defect: f64,
    pub evaluations: usize,
    /// True when the search ended by reaching the distance target or by
    /// refining its step below `min_step`; false when the evaluation budget ran out.
    pub converged: bool,
}

/// Kraus operators affine in the pulse: `K_i(beta) = K_i^0 + sum_j beta_j K_i^j`.
struct AffineKraus {
    free: Vec<ComplexMatrix>,
    slopes: Vec<Vec<ComplexMatrix>>,
    d_sys: usize,
}

impl AffineKraus {
    fn kraus(&self, beta: &[f64]) -> Vec<ComplexMatrix> {
        self.free
            .iter()
            .zip(&self.slopes)
            .map(|(k0, slopes)| {
                let mut k = k0.clone();
                for (s, &b) in slopes.iter().zip(beta) {
                    if b != 0.0 {
                        k += s * C64::new(b, 0.0);
                    }
                }
                k
            })
            .collect()
    }

    fn choi(&self, beta: &[f64]) -> ComplexMatrix {
        choi_from_kraus(&self.kraus(beta), self.d_sys, self.d_sys)
    }
}

/// Fit a pulse so the realized channel's Choi matrix approaches `target_choi`,
/// minimizing `||J(beta) - J*||_F^2 + lambda * energy(beta)` by pattern search
/// (coordinate moves with shrinking step plus Hooke-Jeeves pattern moves) from `beta = 0`.
pub fn synthesize_channel(
    target_choi: &ComplexMatrix,
    joint: &JointSystem,
    anc_state: &ComplexVector,
    horizon: f64,
    harmonics: usize,
    lambda: f64,
    opts: DescentOptions,
) -> Result<ChannelReport> {
    let d = joint.d_sys;
    if target_choi.shape() != (d * d, d * d) {
        return Err(Error::DimensionMismatch {
            context: "target choi",
            expected: format!("{0}x{0}", d * d),
            found: format!("{}x{}", target_choi.nrows(), target_choi.ncols()),
        });
    }
    if target_choi.hermitian_defect() > 1e-8 {
        return Err(Error::invalid("target Choi matrix is not Hermitian"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda must be >= 0"));
    }
    check_anc_state(anc_state, joint.d_anc)?;

    let exp = joint.expansion(horizon, harmonics)?;
    let affine = AffineKraus {
        free: kraus_of(&exp.free, d, joint.d_anc, anc_state),
        slopes: {
            let per_param: Vec<Vec<ComplexMatrix>> = exp.first_order.iter().map(|a| kraus_of(a, d, joint.d_anc, anc_state)).collect();
            (0..joint.d_anc).map(|i| per_param.iter().map(|ks| ks[i].clone()).collect()).collect()
        },
        d_sys: d,
    };
    let weights = energy_weights(horizon, harmonics);
    let energy = |beta: &[f64]| -> f64 { weights.iter().zip(beta).map(|(w, b)| w * b * b).sum() };
    let evals = std::cell::Cell::new(0usize);
    let mut objective = |beta: &[f64]| -> f64 {
        evals.set(evals.get() + 1);
        (affine.choi(beta) - target_choi).iter().map(|z| z.norm_sqr()).sum::<f64>() + lambda * energy(beta)
    };

    let p = 2 * harmonics + 1;
    let mut base = vec![0.0; p];
    let mut f_base = objective(&base);
    let mut step = opts.initial_step;
    let target_obj = opts.target_distance * opts.target_distance;
    let mut converged = false;

    let explore = |point: &[f64], f_point: f64, step: f64, objective: &mut dyn FnMut(&[f64]) -> f64| -> (Vec<f64>, f64) {
        let mut x = point.to_vec();
        let mut fx = f_point;
        for j in 0..x.len() {
            let orig = x[j];
            x[j] = orig + step;
            let f_up = objective(&x);
            if f_up < fx {
                fx = f_up;
                continue;
            }
            x[j] = orig - step;
            let f_down = objective(&x);
            if f_down < fx {
                fx = f_down;
                continue;
            }
            x[j] = orig;
        }
        (x, fx)
    };

    loop {
        if f_base <= target_obj && lambda == 0.0 {
            converged = true;
            break;
        }
        if step < opts.min_step {
            converged = true;
            break;
        }
        if evals.get() >= opts.max_evals {
            break;
        }
        let (mut new, mut f_new) = explore(&base, f_base, step, &mut objective);
        if f_new < f_base {
            // pattern moves along the improving direction while they keep paying off
            loop {
                let pattern: Vec<f64> = new.iter().zip(&base).map(|(n, b)| 2.0 * n - b).collect();
                let f_pattern = objective(&pattern);
                let (trial, f_trial) = explore(&pattern, f_pattern, step, &mut objective);
                base = new;
                f_base = f_new;
                if f_trial < f_base && evals.get() < opts.max_evals {
                    new = trial;
                    f_new = f_trial;
                } else {
                    break;
                }
            }
        } else {
            step *= 0.5;
        }
    }

    let pulse = ControlPulse::new(horizon, base.clone())?;
    let channel = QuantumChannel::new(affine.kraus(&base))?;
    let choi_distance = (channel.choi() - target_choi).frobenius();
    if !converged {
        warn!("channel descent stopped at the evaluation cap with Choi distance {choi_distance:.3e}");
    }
    Ok(ChannelReport {
        energy: energy(&base),
        objective: f_base,
        tp_defect: channel.tp_defect(),
        cp_defect: channel.cp_defect(),
        choi_distance,
        pulse,
        evaluations: evals.get(),
        converged,
    })
}

/// JSON schema for Choi matrices: the matrix record plus `d_in`, `d_out`.
pub fn choi_record(j: &ComplexMatrix, d_in: usize, d_out: usize) -> crate::matrix::MatrixRecord {
    let mut rec = crate::matrix::MatrixRecord::from_matrix(j);
    rec.d_in = Some(d_in);
    rec.d_out = Some(d_out);
    rec
}
