//! Row-major sample storage and the small dense linear algebra the samplers need.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// An `n × d` matrix of draws stored row-major, one observation per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        SampleMatrix {
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(SampleMatrix { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if dim == 0 {
            return Err(invalid("cannot build a sample matrix from no rows"));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(invalid("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(SampleMatrix { dim, data })
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        SampleMatrix {
            dim,
            data: Vec::with_capacity(rows * dim),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nrows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// Keeps the first `k` columns of every row.
    pub fn leading_columns(&self, k: usize) -> SampleMatrix {
        assert!(k >= 1 && k <= self.dim);
        let mut out = SampleMatrix::with_capacity(k, self.nrows());
        for r in self.rows() {
            out.push_row(&r[..k]);
        }
        out
    }

    pub fn filter_rows<P: FnMut(&[f64]) -> bool>(&self, mut keep: P) -> SampleMatrix {
        let mut out = SampleMatrix::with_capacity(self.dim, 0);
        for r in self.rows() {
            if keep(r) {
                out.push_row(r);
            }
        }
        out
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.nrows() as f64;
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Unbiased sample covariance (denominator `n − 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.nrows();
        let mean = self.column_means();
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for r in self.rows() {
            for a in 0..self.dim {
                let da = r[a] - mean[a];
                for b in 0..=a {
                    cov[(a, b)] += da * (r[b] - mean[b]);
                }
            }
        }
        let denom = (n.max(2) - 1) as f64;
        for a in 0..self.dim {
            for b in 0..=a {
                let v = cov[(a, b)] / denom;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        cov
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))
}

/// Checks that `m` is a valid correlation matrix: square, symmetric, unit diagonal, PD.
pub(crate) fn validate_correlation(m: &DMatrix<f64>) -> Result<()> {
    let d = m.nrows();
    if d != m.ncols() || d < 2 {
        return Err(invalid("correlation matrix must be square with dimension ≥ 2"));
    }
    for i in 0..d {
        if (m[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(invalid("correlation matrix must have unit diagonal"));
        }
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(invalid("correlation matrix must be symmetric"));
            }
        }
    }
    cholesky_lower(m)
        .map(|_| ())
        .map_err(|_| invalid("correlation matrix must be positive definite"))
}
