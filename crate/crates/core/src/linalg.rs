//! Dense matrices and the Moore-Penrose pseudo-inverse.

use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A dense real matrix whose entries are all finite.
///
/// Indexing is `(row, col)`; storage is delegated to [`nalgebra::DMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        DenseMatrix(DMatrix::identity(n, n))
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::dimension(
                "matrix entries",
                rows * cols,
                entries.len(),
            ));
        }
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_matrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("matrix has non-finite entries".into()));
        }
        Ok(DenseMatrix(m))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len());
        for r in 0..self.rows() {
            out.extend(self.0.row(r).iter());
        }
        out
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub(crate) fn as_matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.0
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Thin singular value decomposition `A = U diag(s) V'`.
///
/// For an `m x n` input with `k = min(m, n)`, `u` is `m x k`, `v` is `n x k`
/// and `singular_values` has length `k`, sorted in decreasing order. Columns
/// of `u` belonging to zero singular values are zero.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided Jacobi (Hestenes) SVD.
///
/// Pairs of columns are rotated until every pair is orthogonal to working
/// precision; the column norms are then the singular values. Small singular
/// values come out with high relative accuracy, which keeps rank-deficient
/// inputs well behaved under a pseudo-inverse cutoff.
pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    let (rows, cols) = a.shape();
    if rows < cols {
        let t = svd(&DenseMatrix(a.transpose()))?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }

    let mut work = a.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    let mut converged = cols < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..cols - 1 {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (x, y) = (work[(i, p)], work[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut work, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numeric("Jacobi SVD did not converge".into()));
    }

    let norms: Vec<f64> = (0..cols).map(|j| work.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = DMatrix::zeros(rows, cols);
    let mut v_sorted = DMatrix::zeros(cols, cols);
    let mut singular_values = Vec::with_capacity(cols);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        if sigma > 0.0 {
            u.set_column(k, &(work.column(j) / sigma));
        }
        v_sorted.set_column(k, &v.column(j));
        singular_values.push(sigma);
    }
    Ok(Svd {
        u,
        singular_values,
        v: v_sorted,
    })
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Computes the Moore-Penrose pseudo-inverse of `a` from its singular value
/// decomposition.
///
/// Singular values at or below `tolerance` are treated as zero. A tolerance of
/// `0.0` selects `max(rows, cols) * f64::EPSILON * sigma_max`.
pub fn pseudo_inverse(a: &DenseMatrix, tolerance: f64) -> Result<DenseMatrix> {
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Error::Config(format!(
            "pseudo-inverse tolerance must be finite and non-negative, got {tolerance}"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "pseudo-inverse of a non-finite matrix".into(),
        ));
    }
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(DenseMatrix::zeros(cols, rows));
    }

    let Svd {
        u,
        singular_values,
        v,
    } = svd(a)?;
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let cutoff = if tolerance == 0.0 {
        rows.max(cols) as f64 * f64::EPSILON * sigma_max
    } else {
        tolerance
    };

    // A+ = V S+ U'
    let mut v_scaled = v;
    for (j, &s) in singular_values.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    DenseMatrix::from_matrix(v_scaled * u.transpose())
}
