//! Seeded random operators for tests, examples and statistical checks.
//!
//! All generators take an explicit RNG; [`rng`] builds the portable
//! ChaCha8 generator used everywhere in the crate so streams are identical
//! across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{ComplexMatrix, C64};

pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries i.i.d. complex Gaussian with unit variance per component.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-distributed unitary: QR of a Gaussian matrix with the phases of
/// `diag(R)` divided out.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let qr = gaussian_matrix(d, d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let diag = r[(j, j)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(d, d, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Full-rank density matrix `G G^H / tr(G G^H)`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(d, d, rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> crate::matrix::ComplexVector {
    let g = gaussian_matrix(d, 1, rng);
    let norm = g.norm();
    crate::matrix::ComplexVector::from_iterator(d, g.iter().map(|z| z / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::OperatorExt;

    #[test]
    fn unitary_and_density_are_valid() {
        let mut r = rng(7);
        for d in 1..6 {
            assert!(random_unitary(d, &mut r).is_unitary(1e-12));
            let rho = random_density(d, &mut r);
            assert!(rho.is_psd(1e-12));
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn streams_are_reproducible() {
        assert_eq!(gaussian_matrix(3, 3, &mut rng(11)), gaussian_matrix(3, 3, &mut rng(11)));
    }
}
