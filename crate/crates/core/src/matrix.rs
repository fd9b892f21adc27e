//! Dense real symmetric matrices and the norms, Schur products and
//! semidefinite-order tests the rest of the crate is built on.
//!
//! Every [`SymMatrix`] is exactly symmetric with finite entries. Construction
//! averages the input with its transpose and rejects inputs whose asymmetry
//! exceeds `1e-10 * max(1, max |entry|)`, so callers never re-check symmetry.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative asymmetry accepted (and averaged away) at construction.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Default relative tolerance for semidefinite tests.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

/// Eigenvalues in ascending order with matching unit eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates and symmetrizes a square matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("matrix dimension must be positive"));
        }
        let p = m.nrows();
        let mut max_entry = 0.0_f64;
        let mut asymmetry = 0.0_f64;
        for j in 0..p {
            for i in 0..p {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                max_entry = max_entry.max(v.abs());
                asymmetry = asymmetry.max((v - m[(j, i)]).abs());
            }
        }
        let threshold = SYMMETRY_TOLERANCE * max_entry.max(1.0);
        if asymmetry > threshold {
            return Err(Error::NotSymmetric {
                asymmetry,
                threshold,
            });
        }
        Ok(Self::symmetrize(m))
    }

    /// Averages with the transpose without the rejection test. Only for
    /// results that are symmetric in exact arithmetic (e.g. `A * A`).
    fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Self { inner: m }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    /// Builds a matrix from an entry function; `f(i, j)` must equal `f(j, i)`.
    pub fn from_fn(p: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(p, p, f))
    }

    pub fn identity(p: usize) -> Self {
        Self {
            inner: DMatrix::identity(p, p),
        }
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            inner: DMatrix::zeros(p, p),
        }
    }

    pub fn ones(p: usize) -> Self {
        Self {
            inner: DMatrix::from_element(p, p, 1.0),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// The rank-one Gram matrix `x x*`.
    pub fn outer(x: &[f64]) -> Result<Self> {
        let p = x.len();
        Self::new(DMatrix::from_fn(p, p, |i, j| x[i] * x[j]))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.inner[(i, i)]).collect()
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dims(self, other)?;
        Ok(Self {
            inner: &self.inner + &other.inner,
        })
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dims(self, other)?;
        Ok(Self {
            inner: &self.inner - &other.inner,
        })
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        Self {
            inner: &self.inner * c,
        }
    }

    /// `A²`, symmetrized against round-off.
    pub fn square(&self) -> SymMatrix {
        Self::symmetrize(&self.inner * &self.inner)
    }

    /// `diag(x) · A · diag(x)`.
    pub fn congruence_by_diagonal(&self, x: &[f64]) -> Result<SymMatrix> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let p = self.dim();
        Ok(Self {
            inner: DMatrix::from_fn(p, p, |i, j| x[i] * self.inner[(i, j)] * x[j]),
        })
    }

    /// Sum of a non-empty list of matrices of equal dimension.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a SymMatrix>) -> Result<SymMatrix> {
        let mut iter = items.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::invalid("cannot sum an empty list of matrices"))?;
        let mut acc = first.inner.clone();
        for m in iter {
            check_dims(first, m)?;
            acc += &m.inner;
        }
        Ok(Self { inner: acc })
    }

    pub fn eigen(&self) -> Result<Eigen> {
        let p = self.dim();
        let eig = SymmetricEigen::try_new(self.inner.clone(), f64::EPSILON, 10_000 + 100 * p)
            .ok_or(Error::EigenFailure { dim: p })?;
        // sort ascending so callers can rely on ordering
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
        let vectors = DMatrix::from_fn(p, p, |i, c| eig.eigenvectors[(i, order[c])]);
        Ok(Eigen { values, vectors })
    }

    pub fn eigenvalues(&self) -> Result<DVector<f64>> {
        Ok(self.eigen()?.values)
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        let values = self.eigenvalues()?;
        Ok(values[values.len() - 1])
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Rebuilds `V f(Λ) V*` from an eigendecomposition.
    fn spectral_map(eig: &Eigen, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mapped = DMatrix::from_diagonal(&eig.values.map(f));
        Self::symmetrize(&eig.vectors * mapped * eig.vectors.transpose())
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.inner[(i, j)]).collect())
            .collect()
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Entrywise (Schur / Hadamard) product.
pub fn schur_product(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    check_dims(a, b)?;
    Ok(SymMatrix {
        inner: a.inner.component_mul(&b.inner),
    })
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(a: &SymMatrix) -> Result<f64> {
    let values = a.eigenvalues()?;
    Ok(values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// `(Σ |λᵢ|^q)^{1/q}` for real `q ≥ 1`.
pub fn schatten_norm(a: &SymMatrix, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::invalid(format!(
            "Schatten order must be a finite real >= 1, got {q}"
        )));
    }
    let values = a.eigenvalues()?;
    Ok(schatten_from_eigenvalues(values.as_slice(), q))
}

pub(crate) fn schatten_from_eigenvalues(values: &[f64], q: f64) -> f64 {
    // factor out the largest magnitude so high orders cannot overflow
    let top = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| (v.abs() / top).powf(q)).sum();
    top * s.powf(1.0 / q)
}

/// Maximum Euclidean column norm, the `ℓ₁ → ℓ₂` operator norm.
pub fn one_to_two_norm(a: &SymMatrix) -> f64 {
    a.inner
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0_f64, f64::max)
}

pub fn max_norm(a: &SymMatrix) -> f64 {
    a.inner.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Maximum absolute column sum; dominates the spectral norm.
pub fn gershgorin_column_bound(a: &SymMatrix) -> f64 {
    a.inner
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// `λ_min(a) ≥ −tol · max(1, ‖a‖)`.
pub fn is_psd(a: &SymMatrix, tol: f64) -> Result<bool> {
    let values = a.eigenvalues()?;
    let min = values[0];
    let norm = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    Ok(min >= -tol * norm.max(1.0))
}

/// `a ⪯ b` in the semidefinite order.
pub fn psd_order_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    is_psd(&b.sub(a)?, tol)
}

/// Symmetric PSD square root with [`PSD_TOLERANCE`].
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    psd_sqrt_with_tol(a, PSD_TOLERANCE)
}

/// Eigenvalues in `[−tol·max(1,‖a‖), 0)` are clamped to zero; anything more
/// negative is an error.
pub fn psd_sqrt_with_tol(a: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    let eig = a.eigen()?;
    let min = eig.values[0];
    let norm = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if min < -tol * norm.max(1.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(SymMatrix::spectral_map(&eig, |v| v.max(0.0).sqrt()))
}
