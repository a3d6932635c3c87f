//! Pulse design: choose `b(t)` so the first-order gate is Frobenius-closest
//! to a target unitary, with the pulse energy `int b^2` priced by a Lagrange
//! multiplier or held to a budget.
//!
//! The gate is affine in the real pulse coefficients, `vec U(beta) = vec U0 + A beta`,
//! so the problem is a ridge regression solved on the stacked real system
//! `[Re A; Im A]`. One SVD of the energy-whitened design matrix serves every
//! multiplier, which makes sweeps and budget bisection cheap.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyson::{energy_weights, propagate_oracle, ControlPulse, DysonExpansion, OracleOptions};
use crate::error::{Error, Result};
use crate::matrix::{vec_row_major, ComplexMatrix, OperatorExt, C64};
use crate::spectrum::Spectrum;

/// Unitarity tolerance for targets.
pub const TARGET_UNITARY_TOL: f64 = 1e-8;
/// Normal-matrix condition number above which components are dropped
/// (minimum-energy solution).
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyConstraint {
    /// Minimize `residual^2 + lambda * energy`.
    Penalty(f64),
    /// Find the multiplier whose solution spends exactly this energy.
    Budget(f64),
}

#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub target: ComplexMatrix,
    pub spec: Spectrum,
    pub horizon: f64,
    pub harmonics: usize,
    pub constraint: EnergyConstraint,
    /// Accept targets that are not unitary (channel-adjacent experiments).
    pub allow_nonunitary: bool,
    /// Match the target only up to a global phase.
    pub align_phase: bool,
    /// When set, also report the fidelity of the exact propagator under the
    /// designed pulse, starting the step search here.
    pub oracle_steps: Option<usize>,
}

impl SynthesisProblem {
    pub fn new(target: ComplexMatrix, spec: Spectrum, horizon: f64, harmonics: usize, constraint: EnergyConstraint) -> Self {
        SynthesisProblem {
            target,
            spec,
            horizon,
            harmonics,
            constraint,
            allow_nonunitary: false,
            align_phase: false,
            oracle_steps: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.spec.kept();
        if self.target.nrows() != d || self.target.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "synthesis target",
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", self.target.nrows(), self.target.ncols()),
            });
        }
        if !self.allow_nonunitary {
            let deviation = self.target.unitary_defect();
            if deviation > TARGET_UNITARY_TOL {
                return Err(Error::NotUnitary { deviation });
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon must be positive"));
        }
        match self.constraint {
            EnergyConstraint::Penalty(l) if !(l >= 0.0 && l.is_finite()) => Err(Error::invalid("penalty must be >= 0")),
            EnergyConstraint::Budget(e) if !(e > 0.0 && e.is_finite()) => Err(Error::invalid("energy budget must be > 0")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub pulse: ControlPulse,
    /// `||U(beta) - G||_F` against the (possibly phase-aligned) target.
    pub residual: f64,
    /// `|tr(G^H U)| / (N+1)`.
    pub fidelity: f64,
    pub energy: f64,
    pub multiplier: f64,
    /// Condition number of the regularized normal matrix (energy-whitened).
    pub conditioning: f64,
    /// Global phase applied to the target, radians.
    pub target_phase: f64,
    #[serde(default)]
    pub oracle_fidelity: Option<f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Design matrix `A` of shape `((N+1)^2, 2K+1)`; column `j` is the row-major
/// `vec(dU/dbeta_j)`.
pub fn design_matrix(spec: &Spectrum, horizon: f64, harmonics: usize) -> Result<DMatrix<C64>> {
    let exp = DysonExpansion::for_position(spec, horizon, harmonics)?;
    Ok(design_from_expansion(&exp))
}

fn design_from_expansion(exp: &DysonExpansion) -> DMatrix<C64> {
    let d2 = exp.free.len();
    let mut a = DMatrix::zeros(d2, exp.n_params());
    for (j, col) in exp.first_order.iter().enumerate() {
        for (i, z) in vec_row_major(col).into_iter().enumerate() {
            a[(i, j)] = z;
        }
    }
    a
}

/// Ridge least squares in energy-whitened coordinates `gamma = W^{1/2} beta`.
struct RidgeSolver {
    /// `U S` factors of the whitened real design matrix.
    u_t_rhs: DVector<f64>,
    singular: DVector<f64>,
    v: DMatrix<f64>,
    inv_sqrt_w: Vec<f64>,
}

impl RidgeSolver {
    fn new(real_design: &DMatrix<f64>, rhs: &DVector<f64>, weights: &[f64]) -> Self {
        let inv_sqrt_w: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let mut whitened = real_design.clone();
        for (j, s) in inv_sqrt_w.iter().enumerate() {
            whitened.column_mut(j).scale_mut(*s);
        }
        let svd = whitened.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        RidgeSolver { u_t_rhs: u.transpose() * rhs, singular: svd.singular_values, v: v_t.transpose(), inv_sqrt_w }
    }

    fn condition(&self, lambda: f64) -> f64 {
        let max = self.singular.iter().fold(0.0f64, |a, &s| a.max(s * s)) + lambda;
        let min = self.singular.iter().fold(f64::INFINITY, |a, &s| a.min(s * s)) + lambda;
        // a design with more unknowns than rows has implicit zero singular values
        let min = if self.singular.len() < self.v.nrows() { lambda } else { min };
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Returns `(beta, dropped_components)`.
    fn solve(&self, lambda: f64) -> (Vec<f64>, usize) {
        let max = self.singular.iter().fold(0.0f64, |a, &s| a.max(s * s)) + lambda;
        let mut gamma = DVector::<f64>::zeros(self.v.nrows());
        let mut dropped = 0;
        for (k, &s) in self.singular.iter().enumerate() {
            let denom = s * s + lambda;
            if denom <= max / CONDITION_LIMIT || denom == 0.0 {
                dropped += 1;
                continue;
            }
            gamma += self.v.column(k) * (s * self.u_t_rhs[k] / denom);
        }
        let beta = gamma.iter().zip(&self.inv_sqrt_w).map(|(g, s)| g * s).collect();
        (beta, dropped)
    }
}

/// Precomputed pieces shared by [`synthesize`] and [`sweep`].
struct Prepared {
    expansion: DysonExpansion,
    target: ComplexMatrix,
    phase: f64,
    solver: RidgeSolver,
    weights: Vec<f64>,
}

fn stack_real(a: &DMatrix<C64>) -> DMatrix<f64> {
    let rows = a.nrows();
    DMatrix::from_fn(2 * rows, a.ncols(), |i, j| if i < rows { a[(i, j)].re } else { a[(i - rows, j)].im })
}

fn prepare(prob: &SynthesisProblem, expansion: DysonExpansion, phase: f64) -> Prepared {
    let target = &prob.target * C64::from_polar(1.0, phase);
    let design = stack_real(&design_from_expansion(&expansion));
    let diff: Vec<C64> = vec_row_major(&(&target - &expansion.free));
    let n = diff.len();
    let rhs = DVector::from_fn(2 * n, |i, _| if i < n { diff[i].re } else { diff[i - n].im });
    let weights = energy_weights(prob.horizon, prob.harmonics);
    let solver = RidgeSolver::new(&design, &rhs, &weights);
    Prepared { expansion, target, phase, solver, weights }
}

fn phase_of(target: &ComplexMatrix, gate: &ComplexMatrix) -> f64 {
    let overlap = (target.adjoint() * gate).trace();
    if overlap.norm() == 0.0 {
        0.0
    } else {
        overlap.arg()
    }
}

fn report_for(prob: &SynthesisProblem, prep: &Prepared, lambda: f64, mut notes: Vec<String>) -> Result<SynthesisReport> {
    let (beta, dropped) = prep.solver.solve(lambda);
    let conditioning = prep.solver.condition(lambda);
    if dropped > 0 {
        warn!("normal matrix condition {conditioning:.3e}: dropped {dropped} components (minimum-energy solution)");
        notes.push(format!("ill-conditioned (cond {conditioning:.3e}); {dropped} components dropped, minimum-energy solution"));
    }
    let gate = prep.expansion.gate(&beta)?;
    let d = gate.nrows() as f64;
    let residual = (&gate - &prep.target).frobenius();
    let fidelity = (prep.target.adjoint() * &gate).trace().norm() / d;
    let energy: f64 = prep.weights.iter().zip(&beta).map(|(w, b)| w * b * b).sum();
    let pulse = ControlPulse::new(prob.horizon, beta)?;
    let oracle_fidelity = match prob.oracle_steps {
        Some(steps) => {
            let out = propagate_oracle(&prob.spec, &pulse, steps, OracleOptions::default())?;
            Some((prep.target.adjoint() * out.gate).trace().norm() / d)
        }
        None => None,
    };
    Ok(SynthesisReport {
        pulse,
        residual,
        fidelity,
        energy,
        multiplier: lambda,
        conditioning,
        target_phase: prep.phase,
        oracle_fidelity,
        notes,
    })
}

fn prepared(prob: &SynthesisProblem) -> Result<Prepared> {
    prob.validate()?;
    let expansion = DysonExpansion::for_position(&prob.spec, prob.horizon, prob.harmonics)?;
    if !prob.align_phase {
        return Ok(prepare(prob, expansion, 0.0));
    }
    // one fixed-point pass: align to U0, solve, re-align to the solution
    let phase0 = phase_of(&prob.target, &expansion.free);
    let first = prepare(prob, expansion.clone(), phase0);
    let lambda = match prob.constraint {
        EnergyConstraint::Penalty(l) => l,
        EnergyConstraint::Budget(_) => 0.0,
    };
    let (beta, _) = first.solver.solve(lambda);
    let phase1 = phase_of(&prob.target, &expansion.gate(&beta)?);
    Ok(prepare(prob, expansion, phase1))
}

fn energy_at(prep: &Prepared, lambda: f64) -> f64 {
    let (beta, _) = prep.solver.solve(lambda);
    prep.weights.iter().zip(&beta).map(|(w, b)| w * b * b).sum()
}

/// Solve the budget form by geometric bisection on the multiplier.
fn budget_multiplier(prep: &Prepared, budget: f64) -> (f64, Option<String>) {
    if energy_at(prep, 0.0) <= budget {
        return (0.0, Some("unconstrained solution already within the energy budget".into()));
    }
    let mut hi = 1.0;
    while energy_at(prep, hi) > budget && hi < 1e30 {
        hi *= 10.0;
    }
    let mut lo = 1.0;
    while energy_at(prep, lo) < budget && lo > 1e-30 {
        lo /= 10.0;
    }
    if energy_at(prep, lo) < budget {
        return (0.0, Some("budget not bracketed; returning unconstrained solution".into()));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let e = energy_at(prep, mid);
        if (e - budget).abs() <= 1e-12 * budget {
            return (mid, None);
        }
        if e > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    // hi always satisfies the budget
    (hi, None)
}

pub fn synthesize(prob: &SynthesisProblem) -> Result<SynthesisReport> {
    let prep = prepared(prob)?;
    match prob.constraint {
        EnergyConstraint::Penalty(lambda) => report_for(prob, &prep, lambda, vec![]),
        EnergyConstraint::Budget(budget) => {
            let (lambda, note) = budget_multiplier(&prep, budget);
            report_for(prob, &prep, lambda, note.into_iter().collect())
        }
    }
}

/// One penalty-form synthesis per multiplier, in grid order.
pub fn sweep(prob: &SynthesisProblem, lambdas: &[f64]) -> Result<Vec<SynthesisReport>> {
    if lambdas.is_empty() {
        return Ok(vec![]);
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!("multiplier {bad} must be >= 0")));
    }
    let prep = prepared(prob)?;
    lambdas.par_iter().map(|&l| report_for(prob, &prep, l, vec![])).collect()
}

/// Stationarity of the real least-squares objective:
/// `[Re A; Im A]^T r + lambda W beta`, which vanishes at the optimum.
pub fn stationarity_residual(prob: &SynthesisProblem, report: &SynthesisReport) -> Result<f64> {
    let a = design_matrix(&prob.spec, prob.horizon, prob.harmonics)?;
    let real = stack_real(&a);
    let beta = report.pulse.coeffs();
    let exp = DysonExpansion::for_position(&prob.spec, prob.horizon, prob.harmonics)?;
    let target = &prob.target * C64::from_polar(1.0, report.target_phase);
    let r: Vec<C64> = vec_row_major(&(exp.gate(beta)? - target));
    let n = r.len();
    let r_real = DVector::from_fn(2 * n, |i, _| if i < n { r[i].re } else { r[i - n].im });
    let grad = real.transpose() * r_real;
    let w = energy_weights(prob.horizon, prob.harmonics);
    Ok(grad
        .iter()
        .zip(w.iter().zip(beta))
        .map(|(g, (w, b))| (g + report.multiplier * w * b).abs())
        .fold(0.0, f64::max))
}

/// Rows `(lambda, energy, residual, fidelity)` for the Pareto CSV.
pub fn pareto_rows(reports: &[SynthesisReport]) -> Vec<[f64; 4]> {
    reports.iter().map(|r| [r.multiplier, r.energy, r.residual, r.fidelity]).collect()
}
