//! Univariate loss distributions with closed-form cdf, survival and quantile functions.

use serde::{Deserialize, Serialize};

use super::special::{norm_cdf, norm_logpdf, norm_quantile, norm_sf, t_cdf, t_logpdf, t_quantile, t_sf};
use crate::error::{domain, invalid, Result};

/// Which function of a marginal to evaluate; see [`MarginalModel::eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalFn {
    Pdf,
    LogPdf,
    DLogPdf,
    Cdf,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    NonnegativeHalfLine,
    RealLine,
}

/// A parametric marginal loss distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalModel {
    /// Generalized Pareto with shape `xi ≥ 0` and scale `beta > 0`.
    Gpd {
        xi: f64,
        beta: f64,
    },
    /// Pareto type II: `F(x) = 1 − (scale/(scale + x))^shape`.
    Pareto {
        scale: f64,
        shape: f64,
    },
    StudentT {
        nu: f64,
        loc: f64,
        scale: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
}

impl MarginalModel {
    pub fn gpd(xi: f64, beta: f64) -> Result<Self> {
        Self::Gpd { xi, beta }.validated()
    }

    pub fn pareto(scale: f64, shape: f64) -> Result<Self> {
        Self::Pareto { scale, shape }.validated()
    }

    pub fn student_t(nu: f64, loc: f64, scale: f64) -> Result<Self> {
        Self::StudentT { nu, loc, scale }.validated()
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::Normal { mean, sd }.validated()
    }

    /// Checks parameter constraints; used by constructors and after deserialization.
    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Gpd { xi, beta } => xi >= 0.0 && xi.is_finite() && beta > 0.0 && beta.is_finite(),
            Self::Pareto { scale, shape } => scale > 0.0 && shape > 0.0 && scale.is_finite() && shape.is_finite(),
            Self::StudentT { nu, loc, scale } => {
                nu > 0.0 && nu.is_finite() && loc.is_finite() && scale > 0.0 && scale.is_finite()
            }
            Self::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
        };
        if ok {
            Ok(self)
        } else {
            Err(invalid(format!("invalid marginal parameters: {self:?}")))
        }
    }

    pub fn support(&self) -> Support {
        match self {
            Self::Gpd { .. } | Self::Pareto { .. } => Support::NonnegativeHalfLine,
            Self::StudentT { .. } | Self::Normal { .. } => Support::RealLine,
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match self.support() {
            Support::NonnegativeHalfLine => (0.0..f64::INFINITY).contains(&x),
            Support::RealLine => x.is_finite(),
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.in_support(x) {
            Ok(())
        } else {
            Err(domain(format!("x = {x} outside the support of {self:?}")))
        }
    }

    /// Evaluates one of the closed-form functions of the marginal.
    pub fn eval(&self, x: f64, what: MarginalFn) -> Result<f64> {
        match what {
            MarginalFn::Pdf => self.pdf(x),
            MarginalFn::LogPdf => self.logpdf(x),
            MarginalFn::DLogPdf => self.dlogpdf(x),
            MarginalFn::Cdf => self.cdf(x),
            MarginalFn::Quantile => self.quantile(x),
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.logpdf(x).map(f64::exp)
    }

    pub fn logpdf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.logpdf_unchecked(x))
    }

    pub(crate) fn logpdf_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Gpd { xi, beta } => {
                if xi == 0.0 {
                    -beta.ln() - x / beta
                } else {
                    -beta.ln() - (1.0 / xi + 1.0) * (xi * x / beta).ln_1p()
                }
            }
            Self::Pareto { scale, shape } => shape.ln() + shape * scale.ln() - (shape + 1.0) * (scale + x).ln(),
            Self::StudentT { nu, loc, scale } => t_logpdf((x - loc) / scale, nu) - scale.ln(),
            Self::Normal { mean, sd } => norm_logpdf((x - mean) / sd) - sd.ln(),
        }
    }

    /// `d/dx log f(x)`.
    pub fn dlogpdf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.dlogpdf_unchecked(x))
    }

    pub(crate) fn dlogpdf_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Gpd { xi, beta } => -(1.0 + xi) / (beta + xi * x),
            Self::Pareto { scale, shape } => -(shape + 1.0) / (scale + x),
            Self::StudentT { nu, loc, scale } => {
                let z = (x - loc) / scale;
                -(nu + 1.0) * z / (scale * (nu + z * z))
            }
            Self::Normal { mean, sd } => -(x - mean) / (sd * sd),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.cdf_unchecked(x))
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Gpd { .. } | Self::Pareto { .. } => -self.ln_sf_heavy(x).exp_m1(),
            Self::StudentT { nu, loc, scale } => t_cdf((x - loc) / scale, nu),
            Self::Normal { mean, sd } => norm_cdf((x - mean) / sd),
        }
    }

    /// Survival function `1 − F(x)`, computed without cancellation.
    pub fn sf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.sf_unchecked(x))
    }

    pub(crate) fn sf_unchecked(&self, x: f64) -> f64 {
        match *self {
            Self::Gpd { .. } | Self::Pareto { .. } => self.ln_sf_heavy(x).exp(),
            Self::StudentT { nu, loc, scale } => t_sf((x - loc) / scale, nu),
            Self::Normal { mean, sd } => norm_sf((x - mean) / sd),
        }
    }

    /// Log survival for the half-line families.
    fn ln_sf_heavy(&self, x: f64) -> f64 {
        match *self {
            Self::Gpd { xi, beta } => {
                if xi == 0.0 {
                    -x / beta
                } else {
                    -(xi * x / beta).ln_1p() / xi
                }
            }
            Self::Pareto { scale, shape } => -shape * (x / scale).ln_1p(),
            _ => unreachable!("only half-line families"),
        }
    }

    /// Generalized inverse `inf{x : F(x) ≥ u}` for `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(domain(format!("quantile level {u} not in (0, 1)")));
        }
        Ok(self.quantile_unchecked(u))
    }

    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        match *self {
            Self::Gpd { .. } | Self::Pareto { .. } => self.isf_unchecked(1.0 - u),
            Self::StudentT { nu, loc, scale } => loc + scale * t_quantile(u, nu),
            Self::Normal { mean, sd } => mean + sd * norm_quantile(u),
        }
    }

    /// Inverse survival function: the `x` with `1 − F(x) = s`.
    pub fn isf(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(domain(format!("survival level {s} not in (0, 1)")));
        }
        Ok(self.isf_unchecked(s))
    }

    pub(crate) fn isf_unchecked(&self, s: f64) -> f64 {
        match *self {
            Self::Gpd { xi, beta } => {
                if xi == 0.0 {
                    -beta * s.ln()
                } else {
                    beta / xi * (-xi * s.ln()).exp_m1()
                }
            }
            Self::Pareto { scale, shape } => scale * (-s.ln() / shape).exp_m1(),
            Self::StudentT { nu, loc, scale } => loc - scale * t_quantile(s, nu),
            Self::Normal { mean, sd } => mean - sd * norm_quantile(s),
        }
        .max(self.lower_bound())
    }

    pub fn lower_bound(&self) -> f64 {
        match self.support() {
            Support::NonnegativeHalfLine => 0.0,
            Support::RealLine => f64::NEG_INFINITY,
        }
    }

    /// Mean, when finite.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            Self::Gpd { xi, beta } => (xi < 1.0).then(|| beta / (1.0 - xi)),
            Self::Pareto { scale, shape } => (shape > 1.0).then(|| scale / (shape - 1.0)),
            Self::StudentT { nu, loc, .. } => (nu > 1.0).then_some(loc),
            Self::Normal { mean, .. } => Some(mean),
        }
    }
}
