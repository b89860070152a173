//! Random-scan Gibbs sampling on band events `v1 ≤ h·x ≤ v2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crisis_events::{ConcreteCrisisEvent, EventKind};
use crate::error::{domain, invalid, Error, Result};
use crate::exec::{derive_seed, stream_rng, tags};
use crate::loss_models::JointLossModel;
use crate::matrix::{dot, SampleMatrix};
use crate::risk_measures::acf;

/// Conditional slice mass below which a coordinate update is abandoned.
pub const MIN_SLICE_MASS: f64 = 1e-14;
/// Consecutive degenerate slices tolerated before giving up.
pub const MAX_DEGENERATE: usize = 100;

fn default_n_pre() -> usize {
    100
}

fn default_rho() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsParams {
    /// Coordinate selection probabilities.
    pub p: Vec<f64>,
    /// Single-coordinate updates per emitted sample.
    #[serde(rename = "thin_T")]
    pub thin: usize,
    #[serde(default = "default_n_pre")]
    pub n_pre: usize,
    #[serde(default = "default_rho")]
    pub rho_target: f64,
}

impl GibbsParams {
    pub fn new(p: Vec<f64>, thin: usize) -> Result<Self> {
        GibbsParams {
            p,
            thin,
            n_pre: default_n_pre(),
            rho_target: default_rho(),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.p.is_empty() || self.p.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
            return Err(invalid(format!(
                "selection probabilities must be positive, got {:?}",
                self.p
            )));
        }
        let total: f64 = self.p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("selection probabilities sum to {total}")));
        }
        if self.thin == 0 {
            return Err(invalid("thinning interval must be at least 1"));
        }
        if !(self.rho_target > -1.0 && self.rho_target < 1.0) {
            return Err(invalid(format!("rho_target {} outside (−1, 1)", self.rho_target)));
        }
        Ok(self)
    }
}

/// `{x : v1 ≤ h·x ≤ v2}`; either bound may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEvent {
    pub h: Vec<f64>,
    pub v1: f64,
    pub v2: f64,
}

impl BandEvent {
    pub fn new(h: Vec<f64>, v1: f64, v2: f64) -> Result<Self> {
        if h.iter().all(|&c| c == 0.0) || h.iter().any(|c| !c.is_finite()) {
            return Err(invalid("band normal must be finite and nonzero"));
        }
        if v1.is_nan() || v2.is_nan() || !(v1 < v2) {
            return Err(invalid(format!("band needs v1 < v2, got [{v1}, {v2}]")));
        }
        Ok(BandEvent { h, v1, v2 })
    }

    /// `v1 ≤ 1·x ≤ v2` in dimension `d`.
    pub fn sum(d: usize, v1: f64, v2: f64) -> Result<Self> {
        Self::new(vec![1.0; d], v1, v2)
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let s = dot(&self.h, x);
        self.v1 <= s && s <= self.v2
    }
}

impl TryFrom<&ConcreteCrisisEvent> for BandEvent {
    type Error = Error;

    fn try_from(e: &ConcreteCrisisEvent) -> Result<Self> {
        match e.kind() {
            EventKind::Var => Err(Error::Capability(
                "gibbs cannot sample the VaR equality event 1·x = v*; use hmc or an RVaR/ES event".into(),
            )),
            EventKind::Rvar => BandEvent::sum(e.dim, e.thresholds[0], e.thresholds[1]),
            EventKind::Es => BandEvent::sum(e.dim, e.thresholds[0], f64::INFINITY),
        }
    }
}

/// Truncation interval `[a, b]` of coordinate `j` given the others.
fn slice_bounds(band: &BandEvent, j: usize, x: &[f64]) -> (f64, f64) {
    let hj = band.h[j];
    if hj == 0.0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let rest: f64 = band
        .h
        .iter()
        .zip(x)
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, (h, v))| h * v)
        .sum();
    let lo = (band.v1 - rest) / hj;
    let hi = (band.v2 - rest) / hj;
    if hj > 0.0 {
        (lo, hi)
    } else {
        (hi, lo)
    }
}

/// Moves `x[j]` by ulps until `x` is in the band, staying inside `[a, b]`.
fn nudge_into_band(band: &BandEvent, j: usize, x: &mut [f64], a: f64, b: f64) {
    for _ in 0..64 {
        let s = dot(&band.h, x);
        let up = if s < band.v1 {
            band.h[j] > 0.0
        } else if s > band.v2 {
            band.h[j] < 0.0
        } else {
            return;
        };
        let next = if up { x[j].next_up() } else { x[j].next_down() };
        if next < a || next > b {
            return;
        }
        x[j] = next;
    }
}

/// Draws `X_j` from its full conditional truncated to the band, with `x` the current
/// state (its `j`-th entry is ignored) and `w` its latent representation.
fn sample_slice(model: &JointLossModel, band: &BandEvent, j: usize, x: &[f64], w: &[f64], u: f64) -> Result<f64> {
    let (a, b) = slice_bounds(band, j, x);
    let (fa, sa) = model.cond_probs(j, a, w);
    let (fb, sb) = model.cond_probs(j, b, w);
    let upper = sa <= 0.5;
    let mass = if upper { sa - sb } else { fb - fa };
    if !(mass >= MIN_SLICE_MASS) {
        return Err(Error::DegenerateSlice { coordinate: j, mass });
    }
    let v = if upper {
        model.cond_from_upper(j, sa - u * mass, w)
    } else {
        model.cond_from_lower(j, fa + u * mass, w)
    };
    let lower = a.max(model.marginals()[j].lower_bound());
    Ok(v.clamp(lower, b))
}

/// One draw from the band-truncated full conditional of coordinate `j` by inversion at `u`.
pub fn full_conditional_sample(model: &JointLossModel, j: usize, x: &[f64], band: &BandEvent, u: f64) -> Result<f64> {
    let d = model.dim();
    if x.len() != d || band.dim() != d || j >= d {
        return Err(invalid("dimension mismatch between model, band, state and coordinate"));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(domain(format!("uniform draw {u} outside [0, 1]")));
    }
    let w = model.latent_point(x);
    let (a, b) = slice_bounds(band, j, x);
    let mut out = x.to_vec();
    out[j] = sample_slice(model, band, j, x, &w, u)?;
    nudge_into_band(band, j, &mut out, a, b);
    Ok(out[j])
}

/// `p_j ∝ Σ_jj − Σ_{j,−j} Σ_{−j,−j}⁻¹ Σ_{−j,j} = 1/(Σ⁻¹)_jj`.
pub fn select_probs(cov: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>> {
    let d = cov.nrows();
    if d == 0 || cov.ncols() != d {
        return Err(invalid("covariance must be square and nonempty"));
    }
    let prec = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?
        .inverse();
    let cond: Vec<f64> = (0..d).map(|j| 1.0 / prec[(j, j)]).collect();
    if cond.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Numerical("nonpositive conditional variance".into()));
    }
    let total: f64 = cond.iter().sum();
    Ok(cond.into_iter().map(|c| c / total).collect())
}

/// Smallest lag whose autocorrelations are all at most `rho_target`, capped at
/// `n_pre/4`; the flag reports whether the cap was hit.
pub fn thin_interval(prerun: &SampleMatrix, rho_target: f64) -> Result<(usize, bool)> {
    let n = prerun.nrows();
    if n < 50 {
        return Err(Error::InsufficientSample(format!(
            "thinning needs a prerun of at least 50, got {n}"
        )));
    }
    let cap = n / 4;
    let acfs: Vec<Option<Vec<f64>>> = (0..prerun.dim()).map(|j| acf(&prerun.column(j), cap).ok()).collect();
    for lag in 1..=cap {
        let ok = acfs.iter().all(|a| match a {
            Some(r) => r[lag] <= rho_target,
            None => false,
        });
        if ok {
            return Ok((lag, false));
        }
    }
    Ok((cap, true))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GibbsDiagnostics {
    /// Coordinate updates abandoned because the slice had no mass.
    pub degenerate_redraws: usize,
    /// Completed updates per coordinate.
    pub updates: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GibbsOutput {
    pub path: SampleMatrix,
    /// Coordinate updated last before each emitted sample.
    pub last_coordinate: Vec<usize>,
    pub diagnostics: GibbsDiagnostics,
}

fn pick<R: Rng>(rng: &mut R, cum: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * cum[cum.len() - 1];
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

/// Random-scan Gibbs chain of `n` emitted samples, each after `params.thin` single-coordinate updates.
pub fn rsgs_sample(
    model: &JointLossModel,
    band: &BandEvent,
    params: &GibbsParams,
    x0: &[f64],
    n: usize,
    seed: u64,
) -> Result<GibbsOutput> {
    let d = model.dim();
    let params = params.clone().validated()?;
    if x0.len() != d || band.dim() != d || params.p.len() != d {
        return Err(invalid(
            "dimension mismatch between model, band, parameters and initial state",
        ));
    }
    if !band.contains(x0) || !model.in_support(x0) {
        return Err(domain("initial Gibbs state is outside the event or the support"));
    }
    let cum: Vec<f64> = params
        .p
        .iter()
        .scan(0.0, |s, &q| {
            *s += q;
            Some(*s)
        })
        .collect();
    let mut rng = stream_rng(seed, 0);
    let mut x = x0.to_vec();
    let mut w = model.latent_point(&x);
    let mut path = SampleMatrix::with_capacity(d, n);
    let mut last_coordinate = Vec::with_capacity(n);
    let mut diag = GibbsDiagnostics {
        degenerate_redraws: 0,
        updates: vec![0; d],
    };
    for _ in 0..n {
        let mut last = 0;
        for _ in 0..params.thin {
            let mut misses = 0;
            loop {
                let j = pick(&mut rng, &cum);
                let u: f64 = rng.random();
                match sample_slice(model, band, j, &x, &w, u) {
                    Ok(v) => {
                        let (a, b) = slice_bounds(band, j, &x);
                        x[j] = v;
                        nudge_into_band(band, j, &mut x, a, b);
                        w[j] = model.to_latent(j, x[j]);
                        diag.updates[j] += 1;
                        last = j;
                        break;
                    }
                    Err(Error::DegenerateSlice { coordinate, mass }) => {
                        diag.degenerate_redraws += 1;
                        misses += 1;
                        if misses > MAX_DEGENERATE {
                            return Err(Error::DegenerateSlice { coordinate, mass });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        path.push_row(&x);
        last_coordinate.push(last);
    }
    Ok(GibbsOutput {
        path,
        last_coordinate,
        diagnostics: diag,
    })
}

/// Selection probabilities, prerun and thinning chosen from a conditional presample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsTuning {
    pub params: GibbsParams,
    /// Prerun autocorrelations per coordinate, lags `0..=n_pre/4`; empty for a constant coordinate.
    pub prerun_acf: Vec<Vec<f64>>,
    pub thin_capped: bool,
    /// Last prerun state; starts the main chain.
    pub start: Vec<f64>,
}

/// Chooses `p` from the presample covariance, runs an unthinned prerun of `n_pre`
/// updates from `x0` and picks the thinning interval from its autocorrelations.
pub fn rsgs_tune(
    model: &JointLossModel,
    band: &BandEvent,
    presample: &SampleMatrix,
    x0: &[f64],
    n_pre: usize,
    rho_target: f64,
    seed: u64,
) -> Result<GibbsTuning> {
    if presample.nrows() <= presample.dim() {
        return Err(Error::InsufficientSample(format!(
            "selection probabilities need more than {} presample rows, got {}",
            presample.dim(),
            presample.nrows()
        )));
    }
    let p = select_probs(&presample.covariance())?;
    let mut params = GibbsParams {
        p,
        thin: 1,
        n_pre,
        rho_target,
    }
    .validated()?;
    let pre = rsgs_sample(model, band, &params, x0, n_pre, derive_seed(seed, tags::GIBBS_PRERUN))?;
    let (thin, thin_capped) = thin_interval(&pre.path, rho_target)?;
    params.thin = thin;
    let cap = n_pre / 4;
    let prerun_acf = (0..pre.path.dim())
        .map(|j| acf(&pre.path.column(j), cap).unwrap_or_default())
        .collect();
    Ok(GibbsTuning {
        params,
        prerun_acf,
        thin_capped,
        start: pre.path.row(pre.path.nrows() - 1).to_vec(),
    })
}
