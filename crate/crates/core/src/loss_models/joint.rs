//! Sklar composition of marginals and a copula.

use serde::{Deserialize, Serialize};

use super::copula::{CopulaModel, CopulaSpec, LatentScale};
use super::marginal::{MarginalModel, Support};
use crate::error::{domain, invalid, Error, Result};
use crate::exec::{stream_rng, Execution};
use crate::matrix::SampleMatrix;

/// Rows generated per RNG stream in [`JointLossModel::sample`].
pub const SAMPLE_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportClass {
    /// Every marginal lives on `[0, ∞)`.
    PureLosses,
    /// At least one marginal is supported on the whole real line.
    Pnl,
}

/// Which side of the full conditional distribution to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionalFn {
    Cdf,
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub marginals: Vec<MarginalModel>,
    pub copula: CopulaSpec,
}

/// Joint loss distribution `F(x) = C(F_1(x_1), …, F_d(x_d))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "JointSpec", into = "JointSpec")]
pub struct JointLossModel {
    marginals: Vec<MarginalModel>,
    copula: CopulaModel,
    /// Location and scale when the marginal matches the elliptical copula's latent law,
    /// so the latent coordinate is an affine map of `x`.
    affine: Vec<Option<(f64, f64)>>,
}

impl TryFrom<JointSpec> for JointLossModel {
    type Error = Error;

    fn try_from(s: JointSpec) -> Result<Self> {
        let marginals = s
            .marginals
            .into_iter()
            .map(MarginalModel::validated)
            .collect::<Result<Vec<_>>>()?;
        JointLossModel::new(marginals, CopulaModel::try_from(s.copula)?)
    }
}

impl From<JointLossModel> for JointSpec {
    fn from(m: JointLossModel) -> Self {
        JointSpec {
            copula: m.copula.spec(),
            marginals: m.marginals,
        }
    }
}

impl JointLossModel {
    pub fn new(marginals: Vec<MarginalModel>, copula: CopulaModel) -> Result<Self> {
        if marginals.len() != copula.dim() {
            return Err(invalid(format!(
                "{} marginals for a {}-dimensional copula",
                marginals.len(),
                copula.dim()
            )));
        }
        let scale = copula.scale();
        let affine = marginals
            .iter()
            .map(|m| match (scale, m) {
                (LatentScale::Normal, MarginalModel::Normal { mean, sd }) => Some((*mean, *sd)),
                (LatentScale::T(cnu), MarginalModel::StudentT { nu, loc, scale }) if cnu == *nu => Some((*loc, *scale)),
                _ => None,
            })
            .collect();
        Ok(JointLossModel {
            marginals,
            copula,
            affine,
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalModel] {
        &self.marginals
    }

    pub fn copula(&self) -> &CopulaModel {
        &self.copula
    }

    pub fn support_class(&self) -> SupportClass {
        if self
            .marginals
            .iter()
            .all(|m| m.support() == Support::NonnegativeHalfLine)
        {
            SupportClass::PureLosses
        } else {
            SupportClass::Pnl
        }
    }

    pub fn in_support(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.marginals.iter().zip(x).all(|(m, &v)| m.in_support(v))
    }

    // ---- latent coordinates ------------------------------------------------------------

    pub(crate) fn scale(&self) -> LatentScale {
        self.copula.scale()
    }

    /// Latent copula coordinate of `x_j`.
    pub(crate) fn to_latent(&self, j: usize, x: f64) -> f64 {
        if let Some((loc, sc)) = self.affine[j] {
            return (x - loc) / sc;
        }
        let m = &self.marginals[j];
        let sc = self.scale();
        let w = match sc {
            LatentScale::Uniform => m.cdf_unchecked(x),
            LatentScale::Survival => m.sf_unchecked(x),
            LatentScale::Normal | LatentScale::T(_) => {
                let upper = m.sf_unchecked(x);
                if upper < 0.5 {
                    -sc.from_u(upper)
                } else {
                    sc.from_u(m.cdf_unchecked(x))
                }
            }
        };
        sc.clamp(w)
    }

    /// Inverse of [`Self::to_latent`].
    pub(crate) fn from_latent(&self, j: usize, w: f64) -> f64 {
        if let Some((loc, sc)) = self.affine[j] {
            return loc + sc * w;
        }
        let m = &self.marginals[j];
        let sc = self.scale();
        match sc {
            LatentScale::Uniform => m.quantile_unchecked(w),
            LatentScale::Survival => m.isf_unchecked(w),
            LatentScale::Normal | LatentScale::T(_) => {
                if w > 0.0 {
                    m.isf_unchecked(sc.to_upper(w))
                } else {
                    m.quantile_unchecked(sc.to_u(w))
                }
            }
        }
    }

    /// `dw_j/dx_j` at `x_j` with latent value `w`.
    fn dlatent_dx(&self, j: usize, x: f64, w: f64) -> f64 {
        if let Some((_, sc)) = self.affine[j] {
            return 1.0 / sc;
        }
        let sc = self.scale();
        let f = self.marginals[j].logpdf_unchecked(x).exp();
        match sc {
            LatentScale::Uniform => f,
            LatentScale::Survival => -f,
            _ => f * sc.log_abs_dw_du(w).exp(),
        }
    }

    pub(crate) fn latent_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, &v)| self.to_latent(j, v)).collect()
    }

    /// Conditional probabilities `(P(X_j ≤ x | rest), P(X_j > x | rest))` given latent `w`.
    /// Infinite `x` is allowed.
    pub(crate) fn cond_probs(&self, j: usize, x: f64, w: &[f64]) -> (f64, f64) {
        if x == f64::INFINITY {
            return (1.0, 0.0);
        }
        if x < self.marginals[j].lower_bound() || x == f64::NEG_INFINITY {
            return (0.0, 1.0);
        }
        let wj = self.to_latent(j, x);
        let lo = self.copula.cond_cdf_latent(j, wj, w);
        let hi = self.copula.cond_sf_latent(j, wj, w);
        if self.scale().increasing() {
            (lo, hi)
        } else {
            (hi, lo)
        }
    }

    /// `x` with `P(X_j ≤ x | rest) = p`.
    pub(crate) fn cond_from_lower(&self, j: usize, p: f64, w: &[f64]) -> f64 {
        let wj = if self.scale().increasing() {
            self.copula.cond_quantile_latent(j, p, w)
        } else {
            self.copula.cond_isf_latent(j, p, w)
        };
        self.from_latent(j, wj)
    }

    /// `x` with `P(X_j > x | rest) = s`.
    pub(crate) fn cond_from_upper(&self, j: usize, s: f64, w: &[f64]) -> f64 {
        let wj = if self.scale().increasing() {
            self.copula.cond_isf_latent(j, s, w)
        } else {
            self.copula.cond_quantile_latent(j, s, w)
        };
        self.from_latent(j, wj)
    }

    // ---- density and gradient ----------------------------------------------------------

    /// `log f_X(x)`; `−∞` outside the support.
    pub fn logpdf(&self, x: &[f64]) -> f64 {
        if !self.in_support(x) {
            return f64::NEG_INFINITY;
        }
        let w = self.latent_point(x);
        let marg: f64 = self.marginals.iter().zip(x).map(|(m, &v)| m.logpdf_unchecked(v)).sum();
        self.copula.log_density_latent(&w) + marg
    }

    /// Gradient of `log f_X`; the caller guarantees `x` is in the (closed) support.
    pub(crate) fn grad_logpdf_into(&self, x: &[f64], out: &mut [f64]) {
        let w = self.latent_point(x);
        self.copula.grad_log_density_latent(&w, out);
        for j in 0..x.len() {
            out[j] = out[j] * self.dlatent_dx(j, x[j], w[j]) + self.marginals[j].dlogpdf_unchecked(x[j]);
        }
    }

    /// Gradient of `log f_X` at an interior point.
    pub fn grad_logpdf(&self, x: &[f64]) -> Result<Vec<f64>> {
        let interior = self.in_support(x) && self.marginals.iter().zip(x).all(|(m, &v)| v > m.lower_bound());
        if !interior {
            return Err(domain(format!("gradient requested at non-interior point {x:?}")));
        }
        let mut g = vec![0.0; x.len()];
        self.grad_logpdf_into(x, &mut g);
        Ok(g)
    }

    // ---- sampling ----------------------------------------------------------------------

    /// Draws `n` i.i.d. rows. Rows are produced in blocks of [`SAMPLE_CHUNK`], block `b`
    /// using stream `b` of `seed`, so the output does not depend on `exec`.
    pub fn sample(&self, n: usize, seed: u64, exec: Execution) -> SampleMatrix {
        let d = self.dim();
        let mut out = SampleMatrix::zeros(n, d);
        exec.for_each_chunk(out.as_flat_mut(), SAMPLE_CHUNK * d, |b, chunk| {
            let mut rng = stream_rng(seed, b as u64);
            for row in chunk.chunks_mut(d) {
                self.copula.sample_latent(&mut rng, row);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = self.from_latent(j, *v);
                }
            }
        });
        out
    }

    // ---- full conditionals -------------------------------------------------------------

    fn latent_with_rest(&self, j: usize, x_rest: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if j >= d || x_rest.len() != d - 1 {
            return Err(invalid(format!(
                "full conditional needs index < {d} and {} conditioning values",
                d - 1
            )));
        }
        let mut w = vec![0.0; d];
        for (k, &v) in x_rest.iter().enumerate() {
            let kk = if k < j { k } else { k + 1 };
            if !self.marginals[kk].in_support(v) {
                return Err(domain(format!("conditioning value {v} outside support")));
            }
            w[kk] = self.to_latent(kk, v);
        }
        Ok(w)
    }

    /// Full conditional cdf `P(X_j ≤ x | X₋ⱼ = x_rest)`.
    pub fn full_conditional_cdf(&self, j: usize, x_rest: &[f64], x: f64) -> Result<f64> {
        let w = self.latent_with_rest(j, x_rest)?;
        if !self.marginals[j].in_support(x) {
            return Err(domain(format!("x = {x} outside the support of coordinate {j}")));
        }
        Ok(self.cond_probs(j, x, &w).0)
    }

    /// Inverse of [`Self::full_conditional_cdf`].
    pub fn full_conditional_quantile(&self, j: usize, x_rest: &[f64], p: f64) -> Result<f64> {
        let w = self.latent_with_rest(j, x_rest)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("probability {p} not in (0, 1)")));
        }
        Ok(self.cond_from_lower(j, p, &w))
    }

    pub fn full_conditional(&self, j: usize, x_rest: &[f64], arg: f64, what: ConditionalFn) -> Result<f64> {
        match what {
            ConditionalFn::Cdf => self.full_conditional_cdf(j, x_rest, arg),
            ConditionalFn::Quantile => self.full_conditional_quantile(j, x_rest, arg),
        }
    }
}
