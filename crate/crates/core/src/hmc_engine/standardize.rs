//! Affine whitening `x = μ + L·y` from a presample.

use nalgebra::DMatrix;

use super::target::Target;
use crate::crisis_events::{standardize_constraints, LinearConstraint};
use crate::error::{Error, Result};
use crate::matrix::{cholesky_lower, SampleMatrix};

#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mu: Vec<f64>,
    /// Lower Cholesky factor of the presample covariance.
    pub l: DMatrix<f64>,
    /// Set when diagonal jitter was needed to factor the covariance.
    pub jittered: bool,
}

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Standardizer {
            mu: vec![0.0; d],
            l: DMatrix::identity(d, d),
            jittered: false,
        }
    }

    /// Mean and Cholesky factor of the covariance of `sample`.
    pub fn from_sample(sample: &SampleMatrix) -> Result<Self> {
        let d = sample.dim();
        if sample.nrows() <= d {
            return Err(Error::InsufficientSample(format!(
                "standardization needs more than {d} rows, got {}",
                sample.nrows()
            )));
        }
        let cov = sample.covariance();
        let (l, jittered) = match cholesky_lower(&cov) {
            Ok(l) => (l, false),
            Err(_) => {
                let jitter = 1e-8 * cov.trace() / d as f64;
                let l = cholesky_lower(&(cov + DMatrix::identity(d, d) * jitter))
                    .map_err(|_| Error::Numerical("presample covariance is rank deficient even after jitter".into()))?;
                (l, true)
            }
        };
        Ok(Standardizer {
            mu: sample.column_means(),
            l,
            jittered,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn to_x(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| self.mu[i] + (0..=i).map(|j| self.l[(i, j)] * y[j]).sum::<f64>())
            .collect()
    }

    pub fn to_y(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|j| self.l[(i, j)] * y[j]).sum();
            y[i] = (x[i] - self.mu[i] - s) / self.l[(i, i)];
        }
        y
    }

    fn map_rows(&self, s: &SampleMatrix, f: impl Fn(&[f64]) -> Vec<f64>) -> SampleMatrix {
        let mut out = SampleMatrix::with_capacity(s.dim(), s.nrows());
        for r in s.rows() {
            out.push_row(&f(r));
        }
        out
    }

    pub fn sample_to_y(&self, s: &SampleMatrix) -> SampleMatrix {
        self.map_rows(s, |r| self.to_y(r))
    }

    pub fn sample_to_x(&self, s: &SampleMatrix) -> SampleMatrix {
        self.map_rows(s, |r| self.to_x(r))
    }

    /// `Lᵀ g`.
    fn pull_back(&self, g: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (j, o) in out.iter_mut().enumerate() {
            *o = (j..d).map(|i| self.l[(i, j)] * g[i]).sum();
        }
    }
}

/// A target expressed in whitened coordinates.
#[derive(Debug, Clone)]
pub struct StandardizedTarget<'a, T: ?Sized> {
    inner: &'a T,
    pub standardizer: Standardizer,
    constraints: Vec<LinearConstraint>,
}

impl<'a, T: Target + ?Sized> StandardizedTarget<'a, T> {
    pub fn new(inner: &'a T, standardizer: Standardizer) -> Result<Self> {
        let constraints = standardize_constraints(inner.constraints(), &standardizer.l, &standardizer.mu)?;
        Ok(StandardizedTarget {
            inner,
            standardizer,
            constraints,
        })
    }
}

impl<T: Target + ?Sized> Target for StandardizedTarget<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_density(&self, y: &[f64]) -> f64 {
        self.inner.log_density(&self.standardizer.to_x(y))
    }

    fn grad_log_density(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let mut gx = vec![0.0; y.len()];
        self.inner.grad_log_density(&self.standardizer.to_x(y), &mut gx)?;
        self.standardizer.pull_back(&gx, out);
        Ok(())
    }

    fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }
}

/// Whitens `target` with the mean and covariance of `presample` (in target coordinates).
pub fn standardize<'a, T: Target + ?Sized>(
    target: &'a T,
    presample: &SampleMatrix,
) -> Result<StandardizedTarget<'a, T>> {
    StandardizedTarget::new(target, Standardizer::from_sample(presample)?)
}
