//! Dense complex matrices: the carrier for every operator, gate and state.
//!
//! Storage is `nalgebra::DMatrix<Complex64>`. The JSON exchange format is
//! row-major `{rows, cols, re, im}`, independent of nalgebra's column-major
//! layout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Structural predicates used by invariant checks across the crate.
pub trait OperatorExt {
    /// Largest entry of `|A - A^H|`.
    fn hermitian_defect(&self) -> f64;
    /// Largest entry of `|A^H A - I|`.
    fn unitary_defect(&self) -> f64;
    fn is_hermitian(&self, tol: f64) -> bool;
    fn is_unitary(&self, tol: f64) -> bool;
    /// Hermitian and smallest eigenvalue `>= -tol`.
    fn is_psd(&self, tol: f64) -> bool;
    fn frobenius(&self) -> f64;
    fn trace_c(&self) -> C64;
}

impl OperatorExt for ComplexMatrix {
    fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn unitary_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let prod = self.adjoint() * self;
        let n = self.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }

    fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_defect() <= tol
    }

    fn is_psd(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol.max(1e-12)) {
            return false;
        }
        min_eigenvalue(self) >= -tol
    }

    fn frobenius(&self) -> f64 {
        self.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn trace_c(&self) -> C64 {
        self.diagonal().iter().copied().sum()
    }
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Only the lower triangle is read, so the caller is responsible for
/// checking Hermiticity first.
pub fn eigh(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), ComplexMatrix::zeros(0, 0));
    }
    if h.iter().all(|z| z.im == 0.0) {
        // real symmetric: the real solver is several times faster
        let eig = SymmetricEigen::new(h.map(|z| z.re));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = ComplexMatrix::from_fn(n, n, |i, j| C64::new(eig.eigenvectors[(i, order[j])], 0.0));
        return (values, vectors);
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn eigvalsh(h: &ComplexMatrix) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    let mut values: Vec<f64> = if h.iter().all(|z| z.im == 0.0) {
        SymmetricEigen::new(h.map(|z| z.re)).eigenvalues.iter().copied().collect()
    } else {
        SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_eigenvalue(h: &ComplexMatrix) -> f64 {
    eigvalsh(h).first().copied().unwrap_or(0.0)
}

/// `exp(-i t H)` for Hermitian `H`, exactly unitary up to rounding.
pub fn expm_hermitian(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let (values, vectors) = eigh(h);
    let phases = ComplexVector::from_iterator(
        values.len(),
        values.iter().map(|&e| C64::from_polar(1.0, -e * t)),
    );
    let scaled = ComplexMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * phases[j]);
    scaled * vectors.adjoint()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
}

/// `|psi><psi|`
pub fn projector(psi: &ComplexVector) -> ComplexMatrix {
    psi * psi.adjoint()
}

pub fn basis_vector(dim: usize, k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[k] = ONE;
    v
}

/// Row-major `vec(A)` as used by the design matrix of the gate synthesizer.
pub fn vec_row_major(a: &ComplexMatrix) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn unvec_row_major(rows: usize, cols: usize, data: &[C64]) -> Result<ComplexMatrix> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "unvec",
            expected: format!("{}", rows * cols),
            found: format!("{}", data.len()),
        });
    }
    Ok(ComplexMatrix::from_row_slice(rows, cols, data))
}

/// JSON form of a matrix: `{rows, cols, re, im}` in row-major order.
///
/// Choi matrices additionally carry `d_in` and `d_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_out: Option<usize>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let flat = vec_row_major(m);
        MatrixRecord {
            rows: m.nrows(),
            cols: m.ncols(),
            re: flat.iter().map(|z| z.re).collect(),
            im: flat.iter().map(|z| z.im).collect(),
            d_in: None,
            d_out: None,
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::DimensionMismatch {
                context: "matrix record",
                expected: format!("{n} entries ({}x{})", self.rows, self.cols),
                found: format!("re={}, im={}", self.re.len(), self.im.len()),
            });
        }
        let data: Vec<C64> = self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)).collect();
        unvec_row_major(self.rows, self.cols, &data)
    }
}

impl From<&ComplexMatrix> for MatrixRecord {
    fn from(m: &ComplexMatrix) -> Self {
        MatrixRecord::from_matrix(m)
    }
}

/// Serde adapter so structs can hold a `ComplexMatrix` and still emit the
/// row-major record schema.
pub mod serde_matrix {
    use super::{ComplexMatrix, MatrixRecord};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixRecord::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        let rec = MatrixRecord::deserialize(d)?;
        rec.to_matrix().map_err(serde::de::Error::custom)
    }
}

pub mod serde_matrix_vec {
    use super::{ComplexMatrix, MatrixRecord};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(ms: &[ComplexMatrix], s: S) -> Result<S::Ok, S::Error> {
        let recs: Vec<MatrixRecord> = ms.iter().map(MatrixRecord::from_matrix).collect();
        recs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexMatrix>, D::Error> {
        let recs = Vec::<MatrixRecord>::deserialize(d)?;
        recs.iter()
            .map(|r| r.to_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}
