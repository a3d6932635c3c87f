//! Truncated Fock-space ladder algebra and the Z2-graded operator split.
//!
//! Units are fixed to hbar = m = omega = 1 with `Q = (a + a^H)/sqrt(2)` and
//! `P = i(a^H - a)/sqrt(2)`. Products of truncated operators are only exact on
//! the top-left `(M-1)` block ("trusted block"); when an exact projection of a
//! polynomial in `Q` or `P` is needed, use [`position_power`] /
//! [`momentum_power`], which build the product in a padded space and crop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, ZERO};

fn check_cutoff(m: usize, min: usize, what: &str) -> Result<()> {
    if m < min {
        return Err(Error::invalid(format!("{what} needs cutoff >= {min}, got {m}")));
    }
    Ok(())
}

/// Lowering operator `a` on the lowest `m` number states.
pub fn annihilation_op(m: usize) -> Result<ComplexMatrix> {
    check_cutoff(m, 1, "annihilation_op")?;
    let mut a = ComplexMatrix::zeros(m, m);
    for n in 0..m.saturating_sub(1) {
        a[(n, n + 1)] = C64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    Ok(a)
}

pub fn creation_op(m: usize) -> Result<ComplexMatrix> {
    Ok(annihilation_op(m)?.adjoint())
}

pub fn number_op(m: usize) -> Result<ComplexMatrix> {
    check_cutoff(m, 1, "number_op")?;
    Ok(ComplexMatrix::from_fn(m, m, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO }))
}

/// Real symmetric tridiagonal `Q`, `(n, n+1)` entry `sqrt((n+1)/2)`.
pub fn position_op(m: usize) -> Result<ComplexMatrix> {
    check_cutoff(m, 2, "position_op")?;
    let a = annihilation_op(m)?;
    Ok((&a + a.adjoint()) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
}

/// `P`, `(n, n+1)` entry `-i sqrt((n+1)/2)`.
pub fn momentum_op(m: usize) -> Result<ComplexMatrix> {
    check_cutoff(m, 2, "momentum_op")?;
    let a = annihilation_op(m)?;
    Ok((a.adjoint() - &a) * C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2))
}

fn projected_power(m: usize, power: usize, base: fn(usize) -> Result<ComplexMatrix>) -> Result<ComplexMatrix> {
    check_cutoff(m, 1, "projected power")?;
    if power == 0 {
        return Ok(ComplexMatrix::identity(m, m));
    }
    // Q^p couples levels at most p apart, so padding by p makes the cropped
    // block exact.
    let padded = (m + power).max(2);
    let op = base(padded)?;
    let mut acc = op.clone();
    for _ in 1..power {
        acc = &acc * &op;
    }
    Ok(acc.view((0, 0), (m, m)).into_owned())
}

/// Exact matrix elements `<i|Q^p|j>` for `i, j < m`.
pub fn position_power(m: usize, power: usize) -> Result<ComplexMatrix> {
    projected_power(m, power, position_op)
}

/// Exact matrix elements `<i|P^p|j>` for `i, j < m`.
pub fn momentum_power(m: usize, power: usize) -> Result<ComplexMatrix> {
    projected_power(m, power, momentum_op)
}

/// Exact projection of the polynomial `sum_k coeffs[k] Q^k` onto the lowest `m` states.
pub fn position_polynomial(coeffs: &[f64], m: usize) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(m, m);
    for (k, &c) in coeffs.iter().enumerate() {
        if c != 0.0 {
            out += position_power(m, k)? * C64::new(c, 0.0);
        }
    }
    Ok(out)
}

/// A Z2-graded space `h0 (+) h1` with the even block first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedSpace {
    pub dim_even: usize,
    pub dim_odd: usize,
}

impl GradedSpace {
    pub fn new(dim_even: usize, dim_odd: usize) -> Self {
        GradedSpace { dim_even, dim_odd }
    }

    pub fn dim(&self) -> usize {
        self.dim_even + self.dim_odd
    }

    fn is_even_index(&self, i: usize) -> bool {
        i < self.dim_even
    }

    pub fn even_projector(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| if i == j && self.is_even_index(i) { C64::new(1.0, 0.0) } else { ZERO })
    }

    pub fn odd_projector(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| if i == j && !self.is_even_index(i) { C64::new(1.0, 0.0) } else { ZERO })
    }

    /// Grading operator `theta = P0 - P1`.
    pub fn theta(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| {
            if i != j {
                ZERO
            } else if self.is_even_index(i) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(-1.0, 0.0)
            }
        })
    }

    fn check(&self, x: &ComplexMatrix) -> Result<()> {
        if x.nrows() != self.dim() || x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "graded operator",
                expected: format!("{0}x{0}", self.dim()),
                found: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }

    fn same_block(&self, i: usize, j: usize) -> bool {
        self.is_even_index(i) == self.is_even_index(j)
    }
}

/// `X0 = P0 X P0 + P1 X P1`: the block-diagonal part.
pub fn even_part(x: &ComplexMatrix, g: &GradedSpace) -> Result<ComplexMatrix> {
    g.check(x)?;
    Ok(ComplexMatrix::from_fn(x.nrows(), x.ncols(), |i, j| if g.same_block(i, j) { x[(i, j)] } else { ZERO }))
}

/// `X1 = P0 X P1 + P1 X P0`: the block-off-diagonal part.
pub fn odd_part(x: &ComplexMatrix, g: &GradedSpace) -> Result<ComplexMatrix> {
    g.check(x)?;
    Ok(ComplexMatrix::from_fn(x.nrows(), x.ncols(), |i, j| if g.same_block(i, j) { ZERO } else { x[(i, j)] }))
}

/// Parity automorphism `tau(X) = theta X theta = X0 - X1`.
pub fn tau(x: &ComplexMatrix, g: &GradedSpace) -> Result<ComplexMatrix> {
    g.check(x)?;
    Ok(ComplexMatrix::from_fn(x.nrows(), x.ncols(), |i, j| if g.same_block(i, j) { x[(i, j)] } else { -x[(i, j)] }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{commutator, OperatorExt, I};

    #[test]
    fn ladder_small_cutoffs() {
        assert_eq!(annihilation_op(1).unwrap(), ComplexMatrix::zeros(1, 1));
        let a2 = annihilation_op(2).unwrap();
        assert_eq!(a2[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(a2[(1, 0)], ZERO);
        let a3 = annihilation_op(3).unwrap();
        assert!((a3[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(annihilation_op(0).is_err());
    }

    #[test]
    fn position_at_two_levels() {
        let q = position_op(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q[(0, 1)].re - s).abs() < 1e-15 && (q[(1, 0)].re - s).abs() < 1e-15);
        assert_eq!(q[(0, 0)], ZERO);
        assert!(position_op(1).is_err());
        let p = momentum_op(3).unwrap();
        assert!((p[(1, 2)] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn canonical_commutator_on_trusted_block() {
        for m in [2usize, 3, 7, 16] {
            let q = position_op(m).unwrap();
            let p = momentum_op(m).unwrap();
            assert!(q.is_hermitian(0.0) && p.is_hermitian(0.0));
            let c = commutator(&q, &p);
            for i in 0..m - 1 {
                for j in 0..m - 1 {
                    let want = if i == j { I } else { ZERO };
                    assert!((c[(i, j)] - want).norm() < 1e-13, "m={m} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn oscillator_diagonal_at_m16() {
        let q = position_op(16).unwrap();
        let p = momentum_op(16).unwrap();
        let h = (&q * &q + &p * &p) * C64::new(0.5, 0.0);
        for n in 0..=14 {
            assert!((h[(n, n)] - C64::new(n as f64 + 0.5, 0.0)).norm() < 1e-13);
            for k in 0..=14 {
                if k != n {
                    assert!(h[(n, k)].norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn projected_powers_are_exact_to_the_edge() {
        // <n|Q^2|n> = n + 1/2 all the way to the last kept level.
        let q2 = position_power(8, 2).unwrap();
        let p2 = momentum_power(8, 2).unwrap();
        let h = (q2 + p2) * C64::new(0.5, 0.0);
        for n in 0..8 {
            assert!((h[(n, n)].re - (n as f64 + 0.5)).abs() < 1e-13);
        }
        // <0|Q^4|0> = 3/4
        let q4 = position_power(4, 4).unwrap();
        assert!((q4[(0, 0)].re - 0.75).abs() < 1e-14);
    }

    #[test]
    fn graded_examples() {
        let g = GradedSpace::new(1, 1);
        let x = ComplexMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0].map(|v| C64::new(v, 0.0)));
        let even = even_part(&x, &g).unwrap();
        let odd = odd_part(&x, &g).unwrap();
        assert_eq!(even, ComplexMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0].map(|v| C64::new(v, 0.0))));
        assert_eq!(odd, ComplexMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 0.0].map(|v| C64::new(v, 0.0))));
        let t = tau(&x, &g).unwrap();
        assert_eq!(t, ComplexMatrix::from_row_slice(2, 2, &[1.0, -2.0, -3.0, 4.0].map(|v| C64::new(v, 0.0))));

        let id = ComplexMatrix::identity(5, 5);
        let g = GradedSpace::new(3, 2);
        assert_eq!(even_part(&id, &g).unwrap(), id);
        assert_eq!(odd_part(&id, &g).unwrap(), ComplexMatrix::zeros(5, 5));
        assert_eq!(g.even_projector() + g.odd_projector(), id);
        assert_eq!(g.even_projector() * g.odd_projector(), ComplexMatrix::zeros(5, 5));
        assert!(tau(&ComplexMatrix::zeros(3, 3), &GradedSpace::new(1, 1)).is_err());
    }
}
