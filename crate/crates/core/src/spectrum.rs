//! Spectrum of the unperturbed anharmonic oscillator
//! `H0 = (P^2 + Q^2)/2 + c1 Q^3 + c2 Q^4`.
//!
//! Exact truncated diagonalization is the reference; Rayleigh-Schroedinger
//! corrections (first order in `c2`, second order in `c1`) are available for
//! comparison and as an alternative eigenbasis.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock;
use crate::matrix::{self, eigh, serde_matrix, ComplexMatrix, OperatorExt, C64};

/// Tolerance on `|H - H^H|` (relative to the largest entry) accepted by [`diagonalize`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Validity guard for the perturbative energies.
pub const PT_COEFF_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Ascending energies. Exact spectra store all `cutoff_raw` levels,
    /// perturbative ones only the kept block.
    pub energies: Vec<f64>,
    /// Columns are eigenvectors in the Fock basis, `cutoff_raw x cutoff_raw`.
    #[serde(with = "serde_matrix")]
    pub modes: ComplexMatrix,
    pub cutoff_raw: usize,
    pub cutoff_kept: usize,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
}

/// Which approximation produced the eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    #[default]
    Exact,
    Pt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialWarning {
    /// `c2 < 0`: quartic term unbounded below.
    NegativeQuartic,
    /// `c1 != 0` with `c2 == 0`: the cubic well is only metastable.
    MetastableCubic,
}

pub fn potential_warning(c1: f64, c2: f64) -> Option<PotentialWarning> {
    if c2 < 0.0 {
        Some(PotentialWarning::NegativeQuartic)
    } else if c2 == 0.0 && c1 != 0.0 {
        Some(PotentialWarning::MetastableCubic)
    } else {
        None
    }
}

/// Default diagonalization dimension for a gate of dimension `kept`.
pub fn default_raw_cutoff(kept: usize) -> usize {
    (4 * kept).max(32)
}

/// `(P^2 + Q^2)/2 + c1 Q^3 + c2 Q^4` on the lowest `m` number states, with
/// every monomial projected exactly (no truncation artefacts in the last rows).
pub fn build_h0(c1: f64, c2: f64, m: usize) -> Result<ComplexMatrix> {
    if m < 4 {
        return Err(Error::invalid(format!("build_h0 needs cutoff >= 4, got {m}")));
    }
    match potential_warning(c1, c2) {
        Some(PotentialWarning::NegativeQuartic) => warn!("c2 = {c2} < 0: potential unbounded below, truncated spectrum only"),
        Some(PotentialWarning::MetastableCubic) => warn!("c1 = {c1} with c2 = 0: metastable cubic well, truncated spectrum only"),
        None => {}
    }
    let half = C64::new(0.5, 0.0);
    let mut h = fock::momentum_power(m, 2)? * half + fock::position_power(m, 2)? * half;
    h += fock::position_power(m, 3)? * C64::new(c1, 0.0);
    h += fock::position_power(m, 4)? * C64::new(c2, 0.0);
    Ok(h)
}

/// Rotate each column so its largest-magnitude component is real positive.
fn fix_phases(modes: &mut ComplexMatrix) {
    for j in 0..modes.ncols() {
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for i in 0..modes.nrows() {
            let mag = modes[(i, j)].norm();
            // 1e-12 slack keeps near-ties resolved by the lower index
            if mag > best_mag + 1e-12 {
                best_mag = mag;
                best = i;
            }
        }
        if best_mag > 0.0 {
            let phase = modes[(best, j)].conj() / best_mag;
            for i in 0..modes.nrows() {
                modes[(i, j)] *= phase;
            }
        }
    }
}

/// Exact diagonalization of a Hermitian `h`, keeping the lowest `kept` levels
/// for gate construction.
pub fn diagonalize(h: &ComplexMatrix, kept: usize) -> Result<Spectrum> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            context: "diagonalize",
            expected: "square matrix".into(),
            found: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    let m = h.nrows();
    if kept == 0 || kept > m {
        return Err(Error::invalid(format!("kept dimension {kept} must lie in 1..={m}")));
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let deviation = h.hermitian_defect();
    if deviation > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation });
    }
    let (energies, mut modes) = eigh(h);
    fix_phases(&mut modes);
    Ok(Spectrum { energies, modes, cutoff_raw: m, cutoff_kept: kept, c1: None, c2: None })
}

/// Build and exactly diagonalize `H0(c1, c2)`. `raw` defaults to
/// [`default_raw_cutoff`].
pub fn anharmonic_spectrum(c1: f64, c2: f64, kept: usize, raw: Option<usize>) -> Result<Spectrum> {
    let m = raw.unwrap_or_else(|| default_raw_cutoff(kept));
    let h = build_h0(c1, c2, m)?;
    let mut spec = diagonalize(&h, kept)?;
    spec.c1 = Some(c1);
    spec.c2 = Some(c2);
    Ok(spec)
}

fn check_pt_guard(c1: f64, c2: f64) -> Result<()> {
    if c1.abs() > PT_COEFF_LIMIT || c2.abs() > PT_COEFF_LIMIT || !c1.is_finite() || !c2.is_finite() {
        return Err(Error::PerturbationGuard { c1: c1.abs(), c2: c2.abs(), limit: PT_COEFF_LIMIT });
    }
    Ok(())
}

/// `<n|Q^4|n>` and `sum_{m != n} |<m|Q^3|n>|^2 / (n - m)` for `n <= n_max`,
/// both read off exactly projected Fock matrices of size `m`.
pub fn perturbative_corrections(n_max: usize, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m < n_max + 5 {
        return Err(Error::invalid(format!("perturbative corrections up to n={n_max} need cutoff >= {}", n_max + 5)));
    }
    let q3 = fock::position_power(m, 3)?;
    let q4 = fock::position_power(m, 4)?;
    let quartic = (0..=n_max).map(|n| q4[(n, n)].re).collect();
    let cubic = (0..=n_max)
        .map(|n| {
            (0..m)
                .filter(|&k| k != n)
                .map(|k| q3[(k, n)].norm_sqr() / (n as f64 - k as f64))
                .sum()
        })
        .collect();
    Ok((quartic, cubic))
}

/// `E_n ~ (n + 1/2) + c2 <n|Q^4|n> + c1^2 sum_m |<m|Q^3|n>|^2/(n-m)`.
///
/// Mixed `c1 c2` terms and higher orders are not included.
pub fn perturbative_energies(c1: f64, c2: f64, n_max: usize, m: usize) -> Result<Vec<f64>> {
    check_pt_guard(c1, c2)?;
    let (quartic, cubic) = perturbative_corrections(n_max, m)?;
    Ok((0..=n_max)
        .map(|n| n as f64 + 0.5 + c2 * quartic[n] + c1 * c1 * cubic[n])
        .collect())
}

/// Perturbative eigenbasis: first-order corrected number states,
/// Loewdin-orthonormalized so the mode matrix stays unitary.
pub fn perturbative_spectrum(c1: f64, c2: f64, kept: usize, raw: Option<usize>) -> Result<Spectrum> {
    check_pt_guard(c1, c2)?;
    let m = raw.unwrap_or_else(|| default_raw_cutoff(kept));
    if kept == 0 || m < kept + 5 {
        return Err(Error::invalid(format!("perturbative basis needs 1 <= kept and raw >= kept + 5 (kept={kept}, raw={m})")));
    }
    let energies = perturbative_energies(c1, c2, kept - 1, m)?;
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("perturbative energies not ascending; coefficients too large for the perturbative basis"));
    }
    let v = fock::position_power(m, 3)? * C64::new(c1, 0.0) + fock::position_power(m, 4)? * C64::new(c2, 0.0);
    let corrected = ComplexMatrix::from_fn(m, m, |k, n| {
        if k == n {
            C64::new(1.0, 0.0)
        } else {
            v[(k, n)] / (n as f64 - k as f64)
        }
    });
    let overlap = corrected.adjoint() * &corrected;
    let (s_vals, s_vecs) = eigh(&overlap);
    let inv_sqrt = matrix::diag_real(&s_vals.iter().map(|s| 1.0 / s.sqrt()).collect::<Vec<_>>());
    let mut modes = &corrected * (&s_vecs * inv_sqrt * s_vecs.adjoint());
    fix_phases(&mut modes);
    Ok(Spectrum { energies, modes, cutoff_raw: m, cutoff_kept: kept, c1: Some(c1), c2: Some(c2) })
}

impl Spectrum {
    pub fn kept(&self) -> usize {
        self.cutoff_kept
    }

    pub fn kept_energies(&self) -> &[f64] {
        &self.energies[..self.cutoff_kept]
    }

    /// The `cutoff_raw x cutoff_kept` block of eigenvectors.
    pub fn kept_modes(&self) -> ComplexMatrix {
        self.modes.columns(0, self.cutoff_kept).into_owned()
    }

    /// `V_k^H X V_k`: a raw-space operator expressed in the kept eigenbasis.
    pub fn to_eigenbasis(&self, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        if op.nrows() != self.cutoff_raw || op.ncols() != self.cutoff_raw {
            return Err(Error::DimensionMismatch {
                context: "to_eigenbasis",
                expected: format!("{0}x{0}", self.cutoff_raw),
                found: format!("{}x{}", op.nrows(), op.ncols()),
            });
        }
        let vk = self.kept_modes();
        Ok(vk.adjoint() * op * vk)
    }

    /// `V_k G V_k^H`: a kept-block operator embedded in the raw Fock basis.
    pub fn to_fock_basis(&self, g: &ComplexMatrix) -> Result<ComplexMatrix> {
        if g.nrows() != self.cutoff_kept || g.ncols() != self.cutoff_kept {
            return Err(Error::DimensionMismatch {
                context: "to_fock_basis",
                expected: format!("{0}x{0}", self.cutoff_kept),
                found: format!("{}x{}", g.nrows(), g.ncols()),
            });
        }
        let vk = self.kept_modes();
        Ok(&vk * g * vk.adjoint())
    }

    /// Position operator in the kept eigenbasis, `<u_n|Q|u_m>`.
    pub fn position_in_eigenbasis(&self) -> Result<ComplexMatrix> {
        self.to_eigenbasis(&fock::position_op(self.cutoff_raw)?)
    }

    /// Check the structural invariants (used after loading from JSON).
    pub fn validate(&self) -> Result<()> {
        if self.cutoff_kept == 0 || self.cutoff_kept > self.cutoff_raw {
            return Err(Error::invalid(format!("cutoff_kept={} must lie in 1..={}", self.cutoff_kept, self.cutoff_raw)));
        }
        if self.modes.nrows() != self.cutoff_raw || self.modes.ncols() != self.cutoff_raw {
            return Err(Error::DimensionMismatch {
                context: "spectrum modes",
                expected: format!("{0}x{0}", self.cutoff_raw),
                found: format!("{}x{}", self.modes.nrows(), self.modes.ncols()),
            });
        }
        if self.energies.len() < self.cutoff_kept || self.energies.len() > self.cutoff_raw {
            return Err(Error::invalid("energy count outside kept..=raw"));
        }
        if self.energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("energies not ascending"));
        }
        let deviation = self.modes.unitary_defect();
        if deviation > 1e-10 {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(())
    }

    /// Residual `max |H V_k - V_k diag(E_k)|` over the kept block.
    pub fn eigen_residual(&self, h: &ComplexMatrix) -> f64 {
        let vk = self.kept_modes();
        let lhs = h * &vk;
        let mut worst = 0.0f64;
        for j in 0..self.cutoff_kept {
            for i in 0..self.cutoff_raw {
                worst = worst.max((lhs[(i, j)] - vk[(i, j)] * self.energies[j]).norm());
            }
        }
        worst
    }

    /// Rows for the energy CSV table: `(n, E_n)` over the kept block.
    pub fn energy_table(&self) -> Vec<(usize, f64)> {
        self.kept_energies().iter().copied().enumerate().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_h0_is_exactly_diagonal() {
        let h = build_h0(0.0, 0.0, 8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { i as f64 + 0.5 } else { 0.0 };
                assert!((h[(i, j)] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
        assert!(build_h0(0.0, 0.0, 3).is_err());
    }

    #[test]
    fn quartic_ground_entry() {
        let h = build_h0(0.0, 0.01, 32).unwrap();
        assert!((h[(0, 0)].re - 0.5075).abs() < 1e-14);
    }

    #[test]
    fn h0_hermitian_for_random_coefficients() {
        for (c1, c2) in [(0.03, 0.07), (-0.09, 0.01), (0.05, 0.0)] {
            assert!(build_h0(c1, c2, 20).unwrap().hermitian_defect() < 1e-13);
        }
    }

    #[test]
    fn warnings() {
        assert_eq!(potential_warning(0.1, 0.0), Some(PotentialWarning::MetastableCubic));
        assert_eq!(potential_warning(0.0, -0.1), Some(PotentialWarning::NegativeQuartic));
        assert_eq!(potential_warning(0.1, 0.1), None);
    }

    #[test]
    fn harmonic_spectrum_has_identity_modes() {
        let spec = anharmonic_spectrum(0.0, 0.0, 6, Some(16)).unwrap();
        for (n, e) in spec.kept_energies().iter().enumerate() {
            assert!((e - (n as f64 + 0.5)).abs() < 1e-12);
        }
        assert!((spec.modes.clone() - ComplexMatrix::identity(16, 16)).frobenius() < 1e-10);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = build_h0(0.0, 0.0, 4).unwrap();
        h[(0, 1)] = C64::new(0.3, 0.0);
        assert!(matches!(diagonalize(&h, 2), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn quartic_and_cubic_matrix_elements_match_closed_forms() {
        let (quartic, cubic) = perturbative_corrections(4, 12).unwrap();
        for n in 0..=4 {
            let nf = n as f64;
            assert!((quartic[n] - 0.75 * (2.0 * nf * nf + 2.0 * nf + 1.0)).abs() < 1e-12);
            assert!((cubic[n] + (30.0 * nf * nf + 30.0 * nf + 11.0) / 8.0).abs() < 1e-12);
        }
        assert!((quartic[0] - 0.75).abs() < 1e-14);
        assert!((quartic[1] - 3.75).abs() < 1e-12);
        assert!((quartic[2] - 9.75).abs() < 1e-12);
        assert!((cubic[0] + 1.375).abs() < 1e-13);
    }

    #[test]
    fn perturbative_guard() {
        assert!(matches!(perturbative_energies(0.2, 0.0, 3, 16), Err(Error::PerturbationGuard { .. })));
        let e = perturbative_energies(0.0, 0.0, 3, 16).unwrap();
        assert_eq!(e, vec![0.5, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn perturbative_basis_is_unitary_and_close_to_exact() {
        let pt = perturbative_spectrum(0.01, 0.005, 4, None).unwrap();
        pt.validate().unwrap();
        let exact = anharmonic_spectrum(0.01, 0.005, 4, None).unwrap();
        for n in 0..4 {
            let overlap = (exact.modes.column(n).adjoint() * pt.modes.column(n))[(0, 0)].norm();
            assert!(overlap > 0.999, "n={n} overlap={overlap}");
        }
    }

    #[test]
    fn json_roundtrip() {
        let spec = anharmonic_spectrum(0.01, 0.02, 3, Some(12)).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: Spectrum = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(back.energies, spec.energies);
    }
}
