//! Finite-basis representation of a real separable Hilbert space and its
//! complexification.
//!
//! Elements are coordinate vectors in a fixed orthonormal basis, so inner
//! products are Euclidean dot products and the Hilbert-Schmidt norm of an
//! operator is the Frobenius norm of its matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Asymmetry tolerance accepted by [`sym_eigen`].
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative magnitude below which eigenvalues are clipped to zero.
pub const EIGEN_CLIP_TOL: f64 = 1e-12;
/// Negative eigenvalues beyond this (relative) bound are rejected.
pub const EIGEN_NEGATIVE_TOL: f64 = 1e-8;

/// Element of the real space, as coefficients in the orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefVector(pub DVector<f64>);

/// Element of the complexified space `H0 + iH0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCoefVector(pub DVector<Complex64>);

/// Bounded linear operator on the real space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(pub DMatrix<f64>);

/// Bounded linear operator on the complexified space.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOperatorMatrix(pub DMatrix<Complex64>);

/// Descending eigenvalues and matching orthonormal eigenvectors (as columns).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl CoefVector {
    pub fn from_vec(coeffs: Vec<f64>) -> Self {
        CoefVector(DVector::from_vec(coeffs))
    }

    pub fn zeros(p: usize) -> Self {
        CoefVector(DVector::zeros(p))
    }

    /// The `k`-th basis vector (zero based).
    pub fn unit(p: usize, k: usize) -> Self {
        let mut v = DVector::zeros(p);
        v[k] = 1.0;
        CoefVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn inner(&self, other: &CoefVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_complex(&self) -> ComplexCoefVector {
        ComplexCoefVector(self.0.map(|x| Complex64::new(x, 0.0)))
    }
}

impl ComplexCoefVector {
    pub fn new(re: &CoefVector, im: &CoefVector) -> Result<Self> {
        check_dims(re.dim(), im.dim())?;
        Ok(ComplexCoefVector(DVector::from_iterator(
            re.dim(),
            re.0.iter().zip(im.0.iter()).map(|(&a, &b)| Complex64::new(a, b)),
        )))
    }

    pub fn zeros(p: usize) -> Self {
        ComplexCoefVector(DVector::from_element(p, Complex64::new(0.0, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn re(&self) -> CoefVector {
        CoefVector(self.0.map(|z| z.re))
    }

    pub fn im(&self) -> CoefVector {
        CoefVector(self.0.map(|z| z.im))
    }

    /// Squared norm `<u, u>`.
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

impl OperatorMatrix {
    pub fn zeros(p: usize) -> Self {
        OperatorMatrix(DMatrix::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        OperatorMatrix(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        OperatorMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn apply(&self, x: &CoefVector) -> Result<CoefVector> {
        check_dims(self.0.ncols(), x.dim())?;
        Ok(CoefVector(&self.0 * &x.0))
    }

    pub fn hs_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Operator (spectral) norm: the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0
            .singular_values()
            .iter()
            .fold(0.0_f64, |acc, &s| acc.max(s))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn to_complex(&self) -> ComplexOperatorMatrix {
        ComplexOperatorMatrix(self.0.map(|x| Complex64::new(x, 0.0)))
    }
}

impl ComplexOperatorMatrix {
    pub fn identity(p: usize) -> Self {
        ComplexOperatorMatrix(DMatrix::identity(p, p))
    }

    pub fn zeros(p: usize) -> Self {
        ComplexOperatorMatrix(DMatrix::from_element(p, p, Complex64::new(0.0, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn apply(&self, x: &ComplexCoefVector) -> Result<ComplexCoefVector> {
        check_dims(self.0.ncols(), x.dim())?;
        Ok(ComplexCoefVector(&self.0 * &x.0))
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Complex inner product, linear in the first argument:
/// `<u0,v0> + <u1,v1> + i(<u1,v0> - <u0,v1>)`.
pub fn complex_inner(u: &ComplexCoefVector, v: &ComplexCoefVector) -> Result<Complex64> {
    check_dims(u.dim(), v.dim())?;
    Ok(u.0.iter().zip(v.0.iter()).map(|(a, b)| a * b.conj()).sum())
}

/// Rank-one operator `x ⊗ y`, acting as `z ↦ <z, y> x`.
pub fn tensor(x: &ComplexCoefVector, y: &ComplexCoefVector) -> Result<ComplexOperatorMatrix> {
    check_dims(x.dim(), y.dim())?;
    Ok(ComplexOperatorMatrix(&x.0 * y.0.adjoint()))
}

/// Hilbert-Schmidt norm, i.e. the Frobenius norm in an orthonormal basis.
pub fn hs_norm(a: &ComplexOperatorMatrix) -> f64 {
    a.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn max_asymmetry(s: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in (i + 1)..p {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric positive semi-definite operator.
///
/// Values come back in descending order. Values whose magnitude is below
/// `EIGEN_CLIP_TOL` times the largest magnitude are set to zero, and each
/// eigenvector is signed so that its first nonzero coordinate is positive.
pub fn sym_eigen(s: &OperatorMatrix) -> Result<EigenSystem> {
    let m = &s.0;
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let p = m.nrows();
    if p == 0 {
        return Ok(EigenSystem {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let largest = eig.eigenvalues.amax();
    let mut values = Vec::with_capacity(p);
    let mut vectors = DMatrix::zeros(p, p);
    for (col, &idx) in order.iter().enumerate() {
        let mut value = eig.eigenvalues[idx];
        if value.abs() <= EIGEN_CLIP_TOL * largest {
            value = 0.0;
        } else if value < 0.0 {
            if value < -EIGEN_NEGATIVE_TOL * largest.max(1.0) {
                return Err(Error::NegativeEigenvalue(value));
            }
            value = 0.0;
        }
        values.push(value);

        let mut v = eig.eigenvectors.column(idx).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
    }
    Ok(EigenSystem { values, vectors })
}

/// Symmetric inverse square root `S^{-1/2}` of a positive definite operator.
///
/// Fails with [`Error::RankDeficient`] when the smallest eigenvalue is at or
/// below `eps`.
pub fn inv_sqrt(s: &OperatorMatrix, eps: f64) -> Result<OperatorMatrix> {
    let eig = sym_eigen(s)?;
    let p = eig.values.len();
    if let Some(&smallest) = eig.values.last() {
        if smallest <= eps {
            return Err(Error::RankDeficient {
                value: smallest,
                eps,
            });
        }
    }
    let scales = DVector::from_iterator(p, eig.values.iter().map(|v| v.sqrt().recip()));
    let v = &eig.vectors;
    Ok(OperatorMatrix(v * DMatrix::from_diagonal(&scales) * v.transpose()))
}
