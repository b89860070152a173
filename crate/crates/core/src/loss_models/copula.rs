//! Copulas with densities, gradients, full conditional distributions and samplers.
//!
//! Internally each copula works on its own latent scale: uniforms for the
//! independence and Clayton copulas, `1 − u` for the survival Clayton copula,
//! and normal or t scores for the elliptical copulas. Public methods take
//! probability-scale arguments and convert.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::special::{norm_cdf, norm_logpdf, norm_quantile, norm_sf, t_cdf, t_logpdf, t_quantile, t_sf};
use crate::error::{domain, invalid, Error, Result};
use crate::matrix::{cholesky_lower, validate_correlation};

/// Probability-scale values are clamped to `[CLAMP, 1 − CLAMP]` before copula evaluation.
pub const CLAMP: f64 = 1e-12;

pub(crate) fn clamp_unit(u: f64) -> f64 {
    u.clamp(CLAMP, 1.0 - CLAMP)
}

/// Serialized form of a copula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CopulaSpec {
    Independence { dim: usize },
    Clayton { dim: usize, theta: f64 },
    SurvivalClayton { dim: usize, theta: f64 },
    Gaussian { corr: Vec<Vec<f64>> },
    StudentT { nu: f64, corr: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LatentScale {
    /// `w = u`.
    Uniform,
    /// `w = 1 − u`.
    Survival,
    /// `w = Φ⁻¹(u)`.
    Normal,
    /// `w = t_ν⁻¹(u)`.
    T(f64),
}

impl LatentScale {
    pub(crate) fn increasing(self) -> bool {
        !matches!(self, LatentScale::Survival)
    }

    pub(crate) fn from_u(self, u: f64) -> f64 {
        match self {
            LatentScale::Uniform => u,
            LatentScale::Survival => 1.0 - u,
            LatentScale::Normal => norm_quantile(u),
            LatentScale::T(nu) => t_quantile(u, nu),
        }
    }

    pub(crate) fn to_u(self, w: f64) -> f64 {
        match self {
            LatentScale::Uniform => w,
            LatentScale::Survival => 1.0 - w,
            LatentScale::Normal => norm_cdf(w),
            LatentScale::T(nu) => t_cdf(w, nu),
        }
    }

    /// `1 − u` as a function of `w`, without cancellation.
    pub(crate) fn to_upper(self, w: f64) -> f64 {
        match self {
            LatentScale::Uniform => 1.0 - w,
            LatentScale::Survival => w,
            LatentScale::Normal => norm_sf(w),
            LatentScale::T(nu) => t_sf(w, nu),
        }
    }

    /// `log |dw/du|`, the log density of the latent margin negated.
    pub(crate) fn log_abs_dw_du(self, w: f64) -> f64 {
        match self {
            LatentScale::Uniform | LatentScale::Survival => 0.0,
            LatentScale::Normal => -norm_logpdf(w),
            LatentScale::T(nu) => -t_logpdf(w, nu),
        }
    }

    pub(crate) fn dw_du(self, w: f64) -> f64 {
        match self {
            LatentScale::Uniform => 1.0,
            LatentScale::Survival => -1.0,
            _ => self.log_abs_dw_du(w).exp(),
        }
    }

    /// Clamps a latent value so the implied probability lies in `[CLAMP, 1 − CLAMP]`.
    pub(crate) fn clamp(self, w: f64) -> f64 {
        match self {
            LatentScale::Uniform | LatentScale::Survival => clamp_unit(w),
            LatentScale::Normal => w.clamp(-7.034_483_825_777_6, 7.034_483_825_777_6),
            LatentScale::T(_) => w,
        }
    }
}

/// Cached factorizations of a correlation matrix.
#[derive(Debug, Clone)]
pub struct Elliptical {
    corr: DMatrix<f64>,
    chol: DMatrix<f64>,
    prec: DMatrix<f64>,
    log_det: f64,
}

impl Elliptical {
    fn new(corr: DMatrix<f64>) -> Result<Self> {
        validate_correlation(&corr)?;
        let chol = cholesky_lower(&corr)?;
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let prec = corr
            .clone()
            .try_inverse()
            .ok_or_else(|| invalid("correlation matrix is singular"))?;
        Ok(Elliptical {
            corr,
            chol,
            prec,
            log_det,
        })
    }

    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
    }

    fn dim(&self) -> usize {
        self.corr.nrows()
    }

    fn quad(&self, w: &[f64]) -> f64 {
        let d = self.dim();
        let mut q = 0.0;
        for a in 0..d {
            let mut row = 0.0;
            for b in 0..d {
                row += self.prec[(a, b)] * w[b];
            }
            q += w[a] * row;
        }
        q
    }

    fn prec_times(&self, w: &[f64], a: usize) -> f64 {
        (0..self.dim()).map(|b| self.prec[(a, b)] * w[b]).sum()
    }

    /// Conditional location of coordinate `j` and its precision `Q_jj`.
    fn conditional_moments(&self, j: usize, w: &[f64]) -> (f64, f64) {
        let qjj = self.prec[(j, j)];
        let mut m = 0.0;
        for k in 0..self.dim() {
            if k != j {
                m -= self.prec[(j, k)] * w[k];
            }
        }
        (m / qjj, qjj)
    }

    /// `w₋ⱼᵀ P₋ⱼ,₋ⱼ⁻¹ w₋ⱼ`, via the identity `wᵀQw = rest + Q_jj (w_j − m)²`.
    fn rest_quad(&self, j: usize, w: &[f64], m: f64) -> f64 {
        let mut tmp = w.to_vec();
        tmp[j] = m;
        self.quad(&tmp).max(0.0)
    }
}

fn corr_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_corr(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(invalid("correlation matrix must be square"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// A d-dimensional copula.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CopulaSpec", into = "CopulaSpec")]
pub enum CopulaModel {
    Independence { dim: usize },
    Clayton { dim: usize, theta: f64 },
    SurvivalClayton { dim: usize, theta: f64 },
    Gaussian(Elliptical),
    StudentT { nu: f64, ell: Elliptical },
}

impl TryFrom<CopulaSpec> for CopulaModel {
    type Error = Error;

    fn try_from(spec: CopulaSpec) -> Result<Self> {
        match spec {
            CopulaSpec::Independence { dim } => CopulaModel::independence(dim),
            CopulaSpec::Clayton { dim, theta } => CopulaModel::clayton(dim, theta),
            CopulaSpec::SurvivalClayton { dim, theta } => CopulaModel::survival_clayton(dim, theta),
            CopulaSpec::Gaussian { corr } => CopulaModel::gaussian(rows_to_corr(&corr)?),
            CopulaSpec::StudentT { nu, corr } => CopulaModel::student_t(nu, rows_to_corr(&corr)?),
        }
    }
}

impl From<CopulaModel> for CopulaSpec {
    fn from(c: CopulaModel) -> Self {
        match c {
            CopulaModel::Independence { dim } => CopulaSpec::Independence { dim },
            CopulaModel::Clayton { dim, theta } => CopulaSpec::Clayton { dim, theta },
            CopulaModel::SurvivalClayton { dim, theta } => CopulaSpec::SurvivalClayton { dim, theta },
            CopulaModel::Gaussian(e) => CopulaSpec::Gaussian {
                corr: corr_to_rows(&e.corr),
            },
            CopulaModel::StudentT { nu, ell } => CopulaSpec::StudentT {
                nu,
                corr: corr_to_rows(&ell.corr),
            },
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(invalid(format!("copula dimension must be ≥ 2, got {dim}")))
    } else {
        Ok(())
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("Clayton parameter must be > 0, got {theta}")))
    }
}

/// Clayton generator pieces: `φ(w) = w^{−θ} − 1`.
fn clayton_phi(w: f64, theta: f64) -> f64 {
    (-theta * w.ln()).exp_m1()
}

/// Log of the Clayton density at `w`.
fn clayton_log_density(w: &[f64], theta: f64) -> f64 {
    let d = w.len();
    let mut s = 1.0;
    let mut sum_ln = 0.0;
    for &wi in w {
        s += clayton_phi(wi, theta);
        sum_ln += wi.ln();
    }
    let mut c = 0.0;
    for k in 1..d {
        c += (k as f64 * theta).ln_1p();
    }
    c - (theta + 1.0) * sum_ln - (1.0 / theta + d as f64) * s.ln()
}

impl CopulaModel {
    pub fn independence(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(CopulaModel::Independence { dim })
    }

    pub fn clayton(dim: usize, theta: f64) -> Result<Self> {
        check_dim(dim)?;
        check_theta(theta)?;
        Ok(CopulaModel::Clayton { dim, theta })
    }

    pub fn survival_clayton(dim: usize, theta: f64) -> Result<Self> {
        check_dim(dim)?;
        check_theta(theta)?;
        Ok(CopulaModel::SurvivalClayton { dim, theta })
    }

    pub fn gaussian(corr: DMatrix<f64>) -> Result<Self> {
        Ok(CopulaModel::Gaussian(Elliptical::new(corr)?))
    }

    pub fn student_t(nu: f64, corr: DMatrix<f64>) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(invalid(format!("t copula degrees of freedom must be > 0, got {nu}")));
        }
        Ok(CopulaModel::StudentT {
            nu,
            ell: Elliptical::new(corr)?,
        })
    }

    pub fn spec(&self) -> CopulaSpec {
        self.clone().into()
    }

    pub fn dim(&self) -> usize {
        match self {
            CopulaModel::Independence { dim }
            | CopulaModel::Clayton { dim, .. }
            | CopulaModel::SurvivalClayton { dim, .. } => *dim,
            CopulaModel::Gaussian(e) => e.dim(),
            CopulaModel::StudentT { ell, .. } => ell.dim(),
        }
    }

    /// Correlation matrix of an elliptical copula.
    pub fn correlation(&self) -> Option<&DMatrix<f64>> {
        match self {
            CopulaModel::Gaussian(e) | CopulaModel::StudentT { ell: e, .. } => Some(&e.corr),
            _ => None,
        }
    }

    pub(crate) fn scale(&self) -> LatentScale {
        match self {
            CopulaModel::Independence { .. } | CopulaModel::Clayton { .. } => LatentScale::Uniform,
            CopulaModel::SurvivalClayton { .. } => LatentScale::Survival,
            CopulaModel::Gaussian(_) => LatentScale::Normal,
            CopulaModel::StudentT { nu, .. } => LatentScale::T(*nu),
        }
    }

    // ---- latent-scale primitives -------------------------------------------------------

    /// `log c` expressed through latent coordinates.
    pub(crate) fn log_density_latent(&self, w: &[f64]) -> f64 {
        match self {
            CopulaModel::Independence { .. } => 0.0,
            CopulaModel::Clayton { theta, .. } | CopulaModel::SurvivalClayton { theta, .. } => {
                clayton_log_density(w, *theta)
            }
            CopulaModel::Gaussian(e) => {
                let q = e.quad(w);
                let ww: f64 = w.iter().map(|v| v * v).sum();
                -0.5 * e.log_det - 0.5 * (q - ww)
            }
            CopulaModel::StudentT { nu, ell } => {
                let d = w.len() as f64;
                let joint = ln_gamma(0.5 * (nu + d))
                    - ln_gamma(0.5 * nu)
                    - 0.5 * d * (nu * std::f64::consts::PI).ln()
                    - 0.5 * ell.log_det
                    - 0.5 * (nu + d) * (ell.quad(w) / nu).ln_1p();
                let margins: f64 = w.iter().map(|&v| t_logpdf(v, *nu)).sum();
                joint - margins
            }
        }
    }

    /// Gradient of `log c` with respect to the latent coordinates.
    pub(crate) fn grad_log_density_latent(&self, w: &[f64], out: &mut [f64]) {
        match self {
            CopulaModel::Independence { .. } => out.iter_mut().for_each(|g| *g = 0.0),
            CopulaModel::Clayton { theta, .. } | CopulaModel::SurvivalClayton { theta, .. } => {
                let d = w.len() as f64;
                let s: f64 = 1.0 + w.iter().map(|&v| clayton_phi(v, *theta)).sum::<f64>();
                for (g, &v) in out.iter_mut().zip(w) {
                    *g = -(theta + 1.0) / v + (1.0 + d * theta) * v.powf(-theta - 1.0) / s;
                }
            }
            CopulaModel::Gaussian(e) => {
                for (a, g) in out.iter_mut().enumerate() {
                    *g = -e.prec_times(w, a) + w[a];
                }
            }
            CopulaModel::StudentT { nu, ell } => {
                let d = w.len() as f64;
                let denom = 1.0 + ell.quad(w) / nu;
                for (a, g) in out.iter_mut().enumerate() {
                    *g = -(nu + d) / nu * ell.prec_times(w, a) / denom + (nu + 1.0) * w[a] / (nu + w[a] * w[a]);
                }
            }
        }
    }

    /// `P(W_j ≤ w_j | W₋ⱼ)` on the latent scale; `w[j]` is ignored.
    pub(crate) fn cond_cdf_latent(&self, j: usize, wj: f64, w: &[f64]) -> f64 {
        match self {
            CopulaModel::Independence { .. } => wj.clamp(0.0, 1.0),
            CopulaModel::Clayton { theta, .. } | CopulaModel::SurvivalClayton { theta, .. } => {
                if wj <= 0.0 {
                    return 0.0;
                }
                if wj >= 1.0 {
                    return 1.0;
                }
                (-self.clayton_log_ratio(j, wj, w, *theta)).exp()
            }
            CopulaModel::Gaussian(e) => {
                let (m, qjj) = e.conditional_moments(j, w);
                norm_cdf((wj - m) * qjj.sqrt())
            }
            CopulaModel::StudentT { nu, ell } => {
                let (z, df) = t_conditional_score(*nu, ell, j, wj, w);
                t_cdf(z, df)
            }
        }
    }

    /// `P(W_j > w_j | W₋ⱼ)` on the latent scale.
    pub(crate) fn cond_sf_latent(&self, j: usize, wj: f64, w: &[f64]) -> f64 {
        match self {
            CopulaModel::Independence { .. } => (1.0 - wj).clamp(0.0, 1.0),
            CopulaModel::Clayton { theta, .. } | CopulaModel::SurvivalClayton { theta, .. } => {
                if wj <= 0.0 {
                    return 1.0;
                }
                if wj >= 1.0 {
                    return 0.0;
                }
                -(-self.clayton_log_ratio(j, wj, w, *theta)).exp_m1()
            }
            CopulaModel::Gaussian(e) => {
                let (m, qjj) = e.conditional_moments(j, w);
                norm_sf((wj - m) * qjj.sqrt())
            }
            CopulaModel::StudentT { nu, ell } => {
                let (z, df) = t_conditional_score(*nu, ell, j, wj, w);
                t_sf(z, df)
            }
        }
    }

    /// Inverse of [`Self::cond_cdf_latent`] in `w_j`.
    pub(crate) fn cond_quantile_latent(&self, j: usize, p: f64, w: &[f64]) -> f64 {
        match self {
            CopulaModel::Independence { .. } => p,
            CopulaModel::Clayton { theta, dim } | CopulaModel::SurvivalClayton { theta, dim } => {
                clayton_invert(*theta, *dim, self.clayton_rest(j, w, *theta), p.ln())
            }
            CopulaModel::Gaussian(e) => {
                let (m, qjj) = e.conditional_moments(j, w);
                m + norm_quantile(p) / qjj.sqrt()
            }
            CopulaModel::StudentT { nu, ell } => {
                let (m, s, df) = t_conditional_params(*nu, ell, j, w);
                m + s * t_quantile(p, df)
            }
        }
    }

    /// Inverse of [`Self::cond_sf_latent`] in `w_j`.
    pub(crate) fn cond_isf_latent(&self, j: usize, s: f64, w: &[f64]) -> f64 {
        match self {
            CopulaModel::Independence { .. } => 1.0 - s,
            CopulaModel::Clayton { theta, dim } | CopulaModel::SurvivalClayton { theta, dim } => {
                clayton_invert(*theta, *dim, self.clayton_rest(j, w, *theta), (-s).ln_1p())
            }
            CopulaModel::Gaussian(e) => {
                let (m, qjj) = e.conditional_moments(j, w);
                m - norm_quantile(s) / qjj.sqrt()
            }
            CopulaModel::StudentT { nu, ell } => {
                let (m, sc, df) = t_conditional_params(*nu, ell, j, w);
                m - sc * t_quantile(s, df)
            }
        }
    }

    fn clayton_rest(&self, j: usize, w: &[f64], theta: f64) -> f64 {
        w.iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, &v)| clayton_phi(clamp_unit(v), theta))
            .sum()
    }

    /// `(1/θ + d − 1) · ln(1 + φ(w_j)/(1 + t_rest))`, the negated log h-function.
    fn clayton_log_ratio(&self, j: usize, wj: f64, w: &[f64], theta: f64) -> f64 {
        let d = w.len() as f64;
        let rest = self.clayton_rest(j, w, theta);
        let a = 1.0 / theta + d - 1.0;
        a * (clayton_phi(wj, theta) / (1.0 + rest)).ln_1p()
    }

    /// Draws one latent vector.
    pub(crate) fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            CopulaModel::Independence { .. } => {
                out.iter_mut().for_each(|w| *w = rng.sample(Open01));
            }
            CopulaModel::Clayton { theta, .. } | CopulaModel::SurvivalClayton { theta, .. } => {
                // Marshall–Olkin: frailty V ~ Γ(1/θ), U_j = (1 + E_j/V)^{−1/θ}.
                let frailty = Gamma::new(1.0 / theta, 1.0)
                    .expect("theta validated at construction")
                    .sample(rng);
                for w in out.iter_mut() {
                    let e: f64 = rng.sample(Exp1);
                    let v = (-(e / frailty).ln_1p() / theta).exp();
                    *w = v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                }
            }
            CopulaModel::Gaussian(e) => correlated_normals(rng, &e.chol, out),
            CopulaModel::StudentT { nu, ell } => {
                correlated_normals(rng, &ell.chol, out);
                let chi2 = Gamma::new(0.5 * nu, 2.0)
                    .expect("nu validated at construction")
                    .sample(rng);
                let scale = (nu / chi2).sqrt();
                out.iter_mut().for_each(|w| *w *= scale);
            }
        }
    }

    // ---- probability-scale API ---------------------------------------------------------

    fn latent_of(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim() {
            return Err(invalid(format!("expected {} coordinates, got {}", self.dim(), u.len())));
        }
        if let Some(&bad) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(domain(format!("copula argument {bad} not in the open unit interval")));
        }
        let sc = self.scale();
        Ok(u.iter().map(|&v| sc.from_u(clamp_unit(v))).collect())
    }

    /// Copula density (or its log) at an interior point `u`.
    pub fn density(&self, u: &[f64], log_scale: bool) -> Result<f64> {
        let w = self.latent_of(u)?;
        let ld = self.log_density_latent(&w);
        Ok(if log_scale { ld } else { ld.exp() })
    }

    /// Partial derivatives of `log c` with respect to each `u_j`.
    pub fn grad_log_density(&self, u: &[f64]) -> Result<Vec<f64>> {
        let w = self.latent_of(u)?;
        let mut g = vec![0.0; w.len()];
        self.grad_log_density_latent(&w, &mut g);
        let sc = self.scale();
        for (gj, &wj) in g.iter_mut().zip(&w) {
            *gj *= sc.dw_du(wj);
        }
        Ok(g)
    }

    fn full_from_rest(&self, j: usize, u_rest: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if j >= d || u_rest.len() != d - 1 {
            return Err(invalid(format!(
                "h-function needs index < {d} and {} conditioning values",
                d - 1
            )));
        }
        let mut u = Vec::with_capacity(d);
        u.extend_from_slice(&u_rest[..j]);
        u.push(0.5);
        u.extend_from_slice(&u_rest[j..]);
        self.latent_of(&u)
    }

    /// Full conditional copula `C_{j|−j}(u_j | u₋ⱼ)`.
    pub fn hfun(&self, j: usize, u_j: f64, u_rest: &[f64]) -> Result<f64> {
        let w = self.full_from_rest(j, u_rest)?;
        if !(u_j > 0.0 && u_j < 1.0) {
            return Err(domain(format!("u_j = {u_j} not in (0, 1)")));
        }
        let sc = self.scale();
        let wj = sc.from_u(clamp_unit(u_j));
        Ok(if sc.increasing() {
            self.cond_cdf_latent(j, wj, &w)
        } else {
            self.cond_sf_latent(j, wj, &w)
        })
    }

    /// Inverse of [`Self::hfun`] in its first argument.
    pub fn hfun_inv(&self, j: usize, p: f64, u_rest: &[f64]) -> Result<f64> {
        let w = self.full_from_rest(j, u_rest)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("probability {p} not in (0, 1)")));
        }
        let sc = self.scale();
        let wj = if sc.increasing() {
            self.cond_quantile_latent(j, p, &w)
        } else {
            self.cond_isf_latent(j, p, &w)
        };
        Ok(sc.to_u(wj))
    }

    /// Draws `n` rows of copula samples on the probability scale.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        let sc = self.scale();
        (0..n)
            .map(|_| {
                let mut w = vec![0.0; self.dim()];
                self.sample_latent(rng, &mut w);
                w.iter().map(|&v| sc.to_u(v)).collect()
            })
            .collect()
    }
}

/// `w_j = (1 + φ_j)^{−1/θ}` where `ln h = ln_p` fixes `φ_j`.
fn clayton_invert(theta: f64, dim: usize, rest: f64, ln_p: f64) -> f64 {
    let a = 1.0 / theta + dim as f64 - 1.0;
    let phi = (1.0 + rest) * (-ln_p / a).exp_m1();
    (-phi.ln_1p() / theta).exp()
}

fn t_conditional_params(nu: f64, ell: &Elliptical, j: usize, w: &[f64]) -> (f64, f64, f64) {
    let d = ell.dim() as f64;
    let (m, qjj) = ell.conditional_moments(j, w);
    let rest = ell.rest_quad(j, w, m);
    let df = nu + d - 1.0;
    let scale = ((nu + rest) / (df * qjj)).sqrt();
    (m, scale, df)
}

fn t_conditional_score(nu: f64, ell: &Elliptical, j: usize, wj: f64, w: &[f64]) -> (f64, f64) {
    let (m, s, df) = t_conditional_params(nu, ell, j, w);
    ((wj - m) / s, df)
}

fn correlated_normals<R: Rng + ?Sized>(rng: &mut R, chol: &DMatrix<f64>, out: &mut [f64]) {
    let d = out.len();
    let z: DVector<f64> = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
    for a in 0..d {
        let mut s = 0.0;
        for b in 0..=a {
            s += chol[(a, b)] * z[b];
        }
        out[a] = s;
    }
}
