//! Gaugino-VEV control coefficients, the effective gauge Hamiltonian,
//! SUSY-QM partner Hamiltonians and the Witten index.
//!
//! Partner convention: with `A = (W'(Q) + iP)/sqrt(2)`,
//! `H_minus = A^H A = (P^2 + W'^2)/2 - W''/2` and
//! `H_plus = A A^H = (P^2 + W'^2)/2 + W''/2`.
//! For `W = q^2/2` the zero mode lives in `H_minus`.

use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{momentum_power, position_polynomial, position_power};
use crate::matrix::{eigvalsh, identity, kron, ComplexMatrix, C64};

/// Dense real tensor, row-major (last index fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let t = Tensor { shape, data };
        t.validate()?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn validate(&self) -> Result<()> {
        let n: usize = self.shape.iter().product();
        if n != self.data.len() {
            return Err(Error::DimensionMismatch {
                context: "tensor",
                expected: format!("{n} entries for shape {:?}", self.shape),
                found: format!("{}", self.data.len()),
            });
        }
        Ok(())
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let flat = idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i);
        self.data[flat]
    }

    fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VevControl {
    /// `D2(r, s, k)`
    pub d2: Tensor,
    pub p_vev: Vec<f64>,
    pub q_vev: Vec<f64>,
}

/// `a(s) = sum_{r,k} D2(r,s,k) <p_r> <q_k>`.
pub fn vev_control(v: &VevControl) -> Result<Vec<f64>> {
    v.d2.validate()?;
    let [nr, ns, nk] = v.d2.shape[..] else {
        return Err(Error::invalid(format!("D2 must have three indices, got shape {:?}", v.d2.shape)));
    };
    if v.p_vev.len() != nr || v.q_vev.len() != nk {
        return Err(Error::DimensionMismatch {
            context: "vev_control",
            expected: format!("<p> of length {nr}, <q> of length {nk}"),
            found: format!("{} and {}", v.p_vev.len(), v.q_vev.len()),
        });
    }
    Ok((0..ns)
        .map(|s| {
            let mut acc = 0.0;
            for r in 0..nr {
                for k in 0..nk {
                    acc += v.d2.get(&[r, s, k]) * v.p_vev[r] * v.q_vev[k];
                }
            }
            acc
        })
        .collect())
}

/// Coefficients of the effective gauge Hamiltonian
/// `C1 P_r P_s + C2 Q_r Q_s + C3 Q_r Q_s Q_k + C4 Q_r Q_s Q_k Q_m + a_s Q_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeCoefficients {
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub c3: Tensor,
    pub c4: Tensor,
    pub a: Vec<f64>,
}

impl GaugeCoefficients {
    /// One mode with `C1 = C2 = 1/2`, cubic `c1`, quartic `c2` and linear `a`.
    pub fn single_mode(c1: f64, c2: f64, a: f64) -> Self {
        GaugeCoefficients {
            c1: DMatrix::from_element(1, 1, 0.5),
            c2: DMatrix::from_element(1, 1, 0.5),
            c3: Tensor { shape: vec![1, 1, 1], data: vec![c1] },
            c4: Tensor { shape: vec![1, 1, 1, 1], data: vec![c2] },
            a: vec![a],
        }
    }

    pub fn modes(&self) -> usize {
        self.a.len()
    }
}

pub const MAX_MODES: usize = 2;

/// `prod_r Q_r^{p_r}` (or `P`) built mode by mode from exact projected powers.
fn monomial(indices: &[usize], modes: usize, m: usize, momentum: bool) -> Result<ComplexMatrix> {
    let mut out = identity(1);
    for mode in 0..modes {
        let p = indices.iter().filter(|&&i| i == mode).count();
        let factor = if momentum { momentum_power(m, p)? } else { position_power(m, p)? };
        out = kron(&out, &factor);
    }
    Ok(out)
}

fn for_each_index(extent: usize, order: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let total = extent.pow(order as u32);
    let mut idx = vec![0usize; order];
    for mut flat in 0..total {
        for slot in idx.iter_mut().rev() {
            *slot = flat % extent;
            flat /= extent;
        }
        f(&idx)?;
    }
    Ok(())
}

/// The effective Hamiltonian on `modes` truncated oscillators of `m` levels each.
///
/// With one mode and `C1 = C2 = 1/2` this is entrywise identical to
/// `spectrum::build_h0(c1, c2, m) + a Q`.
pub fn effective_hamiltonian(coeffs: &GaugeCoefficients, m: usize) -> Result<ComplexMatrix> {
    let n = coeffs.modes();
    if n == 0 {
        return Err(Error::invalid("need at least one mode"));
    }
    if n > MAX_MODES {
        return Err(Error::invalid(format!("at most {MAX_MODES} modes supported, got {n}")));
    }
    if m < 2 {
        return Err(Error::invalid("cutoff must be >= 2"));
    }
    let shape_err = |what: &'static str, found: String| Error::DimensionMismatch { context: what, expected: format!("extent {n}"), found };
    if coeffs.c1.shape() != (n, n) {
        return Err(shape_err("C1", format!("{:?}", coeffs.c1.shape())));
    }
    if coeffs.c2.shape() != (n, n) {
        return Err(shape_err("C2", format!("{:?}", coeffs.c2.shape())));
    }
    coeffs.c3.validate()?;
    coeffs.c4.validate()?;
    if coeffs.c3.shape != vec![n; 3] {
        return Err(shape_err("C3", format!("{:?}", coeffs.c3.shape)));
    }
    if coeffs.c4.shape != vec![n; 4] {
        return Err(shape_err("C4", format!("{:?}", coeffs.c4.shape)));
    }

    let dim = m.pow(n as u32);
    let mut h = ComplexMatrix::zeros(dim, dim);
    for_each_index(n, 2, |i| {
        h += monomial(i, n, m, true)? * C64::new(coeffs.c1[(i[0], i[1])], 0.0);
        Ok(())
    })?;
    for_each_index(n, 2, |i| {
        h += monomial(i, n, m, false)? * C64::new(coeffs.c2[(i[0], i[1])], 0.0);
        Ok(())
    })?;
    if !coeffs.c3.is_zero() || n == 1 {
        for_each_index(n, 3, |i| {
            h += monomial(i, n, m, false)? * C64::new(coeffs.c3.get(i), 0.0);
            Ok(())
        })?;
    }
    if !coeffs.c4.is_zero() || n == 1 {
        for_each_index(n, 4, |i| {
            h += monomial(i, n, m, false)? * C64::new(coeffs.c4.get(i), 0.0);
            Ok(())
        })?;
    }
    for_each_index(n, 1, |i| {
        h += monomial(i, n, m, false)? * C64::new(coeffs.a[i[0]], 0.0);
        Ok(())
    })?;
    Ok(h)
}

/// Levels compared between cutoffs `m` and `1.5 m`.
pub const CONVERGENCE_LEVELS: usize = 6;
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SusyPair {
    /// `W(q) = sum_k w[k] q^k`.
    pub w_coeffs: Vec<f64>,
    pub cutoff: usize,
    #[serde(with = "crate::matrix::serde_matrix")]
    pub h_plus: ComplexMatrix,
    #[serde(with = "crate::matrix::serde_matrix")]
    pub h_minus: ComplexMatrix,
    /// Largest change of the lowest levels from `m` to `1.5 m`.
    pub cutoff_drift: f64,
}

fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn partner_hamiltonians(w: &[f64], m: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let w1 = derivative(w);
    let w2 = derivative(&w1);
    let half = C64::new(0.5, 0.0);
    let base = momentum_power(m, 2)? * half + position_polynomial(&poly_mul(&w1, &w1), m)? * half;
    let curvature = position_polynomial(&w2, m)? * half;
    Ok((&base + &curvature, base - curvature))
}

fn low_levels(h: &ComplexMatrix) -> Vec<f64> {
    eigvalsh(h).into_iter().take(CONVERGENCE_LEVELS).collect()
}

/// Partner Hamiltonians at cutoff `m`, checked against cutoff `ceil(1.5 m)`.
pub fn susy_pair(w_coeffs: &[f64], m: usize) -> Result<SusyPair> {
    let degree = w_coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
    if degree < 2 {
        return Err(Error::invalid("superpotential must have degree >= 2"));
    }
    if w_coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("superpotential coefficients must be finite"));
    }
    if m < 2 * CONVERGENCE_LEVELS {
        return Err(Error::invalid(format!("cutoff must be >= {}", 2 * CONVERGENCE_LEVELS)));
    }
    let w = &w_coeffs[..=degree];
    let (h_plus, h_minus) = partner_hamiltonians(w, m)?;
    let (big_plus, big_minus) = partner_hamiltonians(w, (3 * m).div_ceil(2))?;
    let drift = [(&h_plus, &big_plus), (&h_minus, &big_minus)]
        .iter()
        .flat_map(|(a, b)| low_levels(a).into_iter().zip(low_levels(b)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    if !(drift < CONVERGENCE_TOL) {
        return Err(Error::CutoffNotConverged { dim: m, drift });
    }
    Ok(SusyPair { w_coeffs: w.to_vec(), cutoff: m, h_plus, h_minus, cutoff_drift: drift })
}

impl SusyPair {
    pub fn spectra(&self) -> (Vec<f64>, Vec<f64>) {
        (eigvalsh(&self.h_plus), eigvalsh(&self.h_minus))
    }

    /// Lowest `count` eigenvalues above `zero_tol` in each sector.
    pub fn positive_levels(&self, zero_tol: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
        let (plus, minus) = self.spectra();
        let pick = |v: Vec<f64>| v.into_iter().filter(|&e| e >= zero_tol).take(count).collect::<Vec<_>>();
        (pick(plus), pick(minus))
    }

    /// Largest gap between paired positive levels (lowest `count`).
    pub fn pairing_defect(&self, zero_tol: f64, count: usize) -> f64 {
        let (plus, minus) = self.positive_levels(zero_tol, count);
        plus.iter().zip(&minus).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SusyPhase {
    Unbroken,
    Broken,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexReport {
    pub index: i64,
    pub phase: SusyPhase,
    pub zero_modes_minus: usize,
    pub zero_modes_plus: usize,
    /// Lowest eigenvalue over both sectors.
    pub vacuum_energy: f64,
    pub zero_tol: f64,
    /// Some eigenvalue lies within a factor ten of `zero_tol`.
    pub ambiguous: bool,
    /// `(tolerance, index)` at `zero_tol / 10`, `zero_tol`, `zero_tol * 10`.
    pub sensitivity: Vec<(f64, i64)>,
}

pub const DEFAULT_ZERO_TOL: f64 = 1e-6;

/// Witten index `#zero(H_minus) - #zero(H_plus)` of the truncated pair.
pub fn witten_index(pair: &SusyPair, zero_tol: f64) -> Result<IndexReport> {
    if !(zero_tol > 0.0 && zero_tol.is_finite()) {
        return Err(Error::invalid("zero_tol must be positive"));
    }
    let (plus, minus) = pair.spectra();
    let count = |v: &[f64], tol: f64| v.iter().filter(|&&e| e < tol).count();
    let index_at = |tol: f64| count(&minus, tol) as i64 - count(&plus, tol) as i64;
    let zero_modes_minus = count(&minus, zero_tol);
    let zero_modes_plus = count(&plus, zero_tol);
    let index = zero_modes_minus as i64 - zero_modes_plus as i64;
    let ambiguous = plus.iter().chain(&minus).any(|&e| e.abs() >= zero_tol / 10.0 && e.abs() <= zero_tol * 10.0);
    if ambiguous {
        warn!("eigenvalue within a factor 10 of zero_tol = {zero_tol}; index classification is tolerance sensitive");
    }
    let sensitivity: Vec<(f64, i64)> = [zero_tol / 10.0, zero_tol, zero_tol * 10.0].iter().map(|&t| (t, index_at(t))).collect();
    info!("witten index sensitivity: {sensitivity:?}");
    let phase = if index != 0 || zero_modes_minus + zero_modes_plus > 0 { SusyPhase::Unbroken } else { SusyPhase::Broken };
    Ok(IndexReport {
        index,
        phase,
        zero_modes_minus,
        zero_modes_plus,
        vacuum_energy: plus[0].min(minus[0]),
        zero_tol,
        ambiguous,
        sensitivity,
    })
}

/// Parse `"0,0,0.5"` (ascending powers).
pub fn parse_coefficients(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad coefficient {t:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::position_op;
    use crate::spectrum::build_h0;

    #[test]
    fn vev_examples() {
        let one = VevControl { d2: Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap(), p_vev: vec![2.0], q_vev: vec![3.0] };
        assert_eq!(vev_control(&one).unwrap(), vec![6.0]);
        let d2 = Tensor::new(vec![2, 3, 2], (0..12).map(|x| x as f64 - 4.0).collect()).unwrap();
        let zero = VevControl { d2: d2.clone(), p_vev: vec![0.0; 2], q_vev: vec![0.0; 2] };
        assert!(vev_control(&zero).unwrap().iter().all(|&a| a == 0.0));
        let v = VevControl { d2: d2.clone(), p_vev: vec![0.5, -1.0], q_vev: vec![2.0, 0.25] };
        let scaled = VevControl { p_vev: vec![1.5, -3.0], ..v.clone() };
        for (a, b) in vev_control(&v).unwrap().iter().zip(vev_control(&scaled).unwrap()) {
            assert!((3.0 * a - b).abs() < 1e-14);
        }
        let bad = VevControl { p_vev: vec![1.0], ..v };
        assert!(vev_control(&bad).is_err());
    }

    #[test]
    fn single_mode_matches_build_h0() {
        for &(c1, c2, a) in &[(0.0, 0.0, 0.0), (0.05, 0.02, 0.3), (-0.1, 0.07, -0.2)] {
            let h = effective_hamiltonian(&GaugeCoefficients::single_mode(c1, c2, a), 12).unwrap();
            let want = build_h0(c1, c2, 12).unwrap() + position_op(12).unwrap() * C64::new(a, 0.0);
            assert_eq!(h, want);
        }
    }

    #[test]
    fn displaced_oscillator_ground_energy() {
        let h = effective_hamiltonian(&GaugeCoefficients::single_mode(0.0, 0.0, 0.2), 40).unwrap();
        assert!((eigvalsh(&h)[0] - 0.48).abs() < 1e-12);
        let h0 = effective_hamiltonian(&GaugeCoefficients::single_mode(0.0, 0.0, 0.0), 6).unwrap();
        for (n, e) in eigvalsh(&h0).iter().enumerate() {
            assert!((e - (n as f64 + 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn two_uncoupled_modes_add() {
        let coeffs = GaugeCoefficients {
            c1: DMatrix::from_diagonal_element(2, 2, 0.5),
            c2: DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]),
            c3: Tensor::zeros(vec![2; 3]),
            c4: Tensor::zeros(vec![2; 4]),
            a: vec![0.0, 0.0],
        };
        let e = eigvalsh(&effective_hamiltonian(&coeffs, 24).unwrap());
        // omega_1 = 1, omega_2 = 2; the second mode is squeezed in the truncated basis
        assert!((e[0] - 1.5).abs() < 1e-6);
        assert!((e[1] - 2.5).abs() < 1e-6);
        let three = GaugeCoefficients { a: vec![0.0; 3], ..coeffs };
        assert!(effective_hamiltonian(&three, 4).is_err());
    }

    #[test]
    fn harmonic_superpotential() {
        let pair = susy_pair(&[0.0, 0.0, 0.5], 24).unwrap();
        let (plus, minus) = pair.spectra();
        for n in 0..6 {
            assert!((minus[n] - n as f64).abs() < 1e-12);
            assert!((plus[n] - (n + 1) as f64).abs() < 1e-12);
        }
        let rep = witten_index(&pair, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(rep.index, 1);
        assert_eq!(rep.phase, SusyPhase::Unbroken);
        assert!(!rep.ambiguous);
    }

    #[test]
    fn cubic_superpotential_breaks_susy() {
        let pair = susy_pair(&[0.0, 0.0, 0.0, 1.0 / 3.0], 64).unwrap();
        let rep = witten_index(&pair, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(rep.index, 0);
        assert_eq!(rep.phase, SusyPhase::Broken);
        assert!(rep.vacuum_energy > 1e-3);
        assert!(pair.pairing_defect(DEFAULT_ZERO_TOL, 5) < 1e-6);
    }

    #[test]
    fn coarse_tolerance_is_flagged() {
        let pair = susy_pair(&[0.0, 0.0, 0.5], 24).unwrap();
        assert!(witten_index(&pair, 1.5).unwrap().ambiguous);
    }

    #[test]
    fn rejects_low_degree_and_unconverged() {
        assert!(susy_pair(&[1.0, 2.0, 0.0], 24).is_err());
        assert!(matches!(susy_pair(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0], 12), Err(Error::CutoffNotConverged { .. })));
        assert_eq!(parse_coefficients("0, 0,0.5").unwrap(), vec![0.0, 0.0, 0.5]);
        assert!(parse_coefficients("0,x").is_err());
    }
}
