//! Empirical risk measures, batch-means standard errors and chain diagnostics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A univariate risk measure applied to a coordinate of the conditional sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MarginalRiskMeasure {
    Mean,
    Var { beta: f64 },
    Rvar { beta1: f64, beta2: f64 },
    Es { beta: f64 },
}

impl MarginalRiskMeasure {
    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Mean => true,
            Self::Var { beta } | Self::Es { beta } => beta > 0.0 && beta < 1.0,
            Self::Rvar { beta1, beta2 } => beta1 > 0.0 && beta1 < beta2 && beta2 <= 1.0,
        };
        if ok {
            Ok(self)
        } else {
            Err(invalid(format!("invalid risk measure levels: {self}")))
        }
    }

    /// `(β1, β2)` for the interval-type measures.
    fn interval(self) -> Option<(f64, f64)> {
        match self {
            Self::Rvar { beta1, beta2 } => Some((beta1, beta2)),
            Self::Es { beta } => Some((beta, 1.0)),
            _ => None,
        }
    }
}

impl fmt::Display for MarginalRiskMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mean => write!(f, "mean"),
            Self::Var { beta } => write!(f, "var:{beta}"),
            Self::Rvar { beta1, beta2 } => write!(f, "rvar:{beta1},{beta2}"),
            Self::Es { beta } => write!(f, "es:{beta}"),
        }
    }
}

impl FromStr for MarginalRiskMeasure {
    type Err = Error;

    /// Parses `mean`, `var:β`, `rvar:β1,β2` or `es:β`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, args) = s.split_once(':').unwrap_or((s.as_str(), ""));
        let levels: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| invalid(format!("bad level in {s:?}: {e}")))?
        };
        let m = match (name, levels.as_slice()) {
            ("mean", []) => Self::Mean,
            ("var", [b]) => Self::Var { beta: *b },
            ("rvar", [a, b]) => Self::Rvar { beta1: *a, beta2: *b },
            ("es", [b]) => Self::Es { beta: *b },
            _ => return Err(invalid(format!("cannot parse risk measure {s:?}"))),
        };
        m.validated()
    }
}

/// Point estimate with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithSE {
    pub point: f64,
    pub se: f64,
    pub n_batches: usize,
    /// Set when fewer than ten batches were available.
    pub few_batches: bool,
}

/// Order-statistic index `⌈nα⌉` (1-based), robust to `nα` landing just above an integer.
pub(crate) fn ceil_index(n: usize, alpha: f64) -> usize {
    let x = n as f64 * alpha;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (k.max(0.0) as usize).min(n)
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

fn nonempty(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        Err(Error::InsufficientSample("empty sample".into()))
    } else {
        Ok(())
    }
}

/// Generalized inverse of the empirical cdf: the order statistic `x_(⌈nα⌉)`.
pub fn empirical_quantile(sample: &[f64], alpha: f64) -> Result<f64> {
    nonempty(sample)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("quantile level {alpha} not in (0, 1]")));
    }
    let s = sorted(sample);
    Ok(quantile_sorted(&s, alpha))
}

fn quantile_sorted(s: &[f64], alpha: f64) -> f64 {
    let k = ceil_index(s.len(), alpha).max(1);
    s[k - 1]
}

fn interval_mean_sorted(s: &[f64], b1: f64, b2: f64) -> Result<f64> {
    let n = s.len();
    let lo = ceil_index(n, b1);
    let hi = ceil_index(n, b2);
    if hi <= lo {
        return Err(Error::InsufficientSample(format!(
            "no order statistic between levels {b1} and {b2} with n = {n}"
        )));
    }
    Ok(s[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
}

/// Applies `m` to the empirical distribution of `sample`.
pub fn empirical_measure(sample: &[f64], m: MarginalRiskMeasure) -> Result<f64> {
    nonempty(sample)?;
    match m {
        MarginalRiskMeasure::Mean => Ok(sample.iter().sum::<f64>() / sample.len() as f64),
        MarginalRiskMeasure::Var { beta } => Ok(quantile_sorted(&sorted(sample), beta)),
        _ => {
            let (b1, b2) = m.interval().expect("interval measure");
            interval_mean_sorted(&sorted(sample), b1, b2)
        }
    }
}

/// Batch length `⌈√N⌉`.
pub fn batch_length(n: usize) -> usize {
    let mut l = (n as f64).sqrt() as usize;
    while l * l < n {
        l += 1;
    }
    while l > 1 && (l - 1) * (l - 1) >= n {
        l -= 1;
    }
    l
}

/// Point estimate on the full path and its batch-means standard error.
pub fn batch_means_se(path: &[f64], m: MarginalRiskMeasure) -> Result<EstimateWithSE> {
    let n = path.len();
    if n < 100 {
        return Err(Error::InsufficientSample(format!(
            "batch means needs at least 100 values, got {n}"
        )));
    }
    let point = empirical_measure(path, m)?;
    let l = batch_length(n);
    let mut values = Vec::with_capacity(n / l + 1);
    for batch in path.chunks(l) {
        if 2 * batch.len() < l {
            break;
        }
        values.push(empirical_measure(batch, m)?);
    }
    let b = values.len();
    let mean = values.iter().sum::<f64>() / b as f64;
    let var = if b > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64
    } else {
        0.0
    };
    Ok(EstimateWithSE {
        point,
        se: (var / b as f64).sqrt(),
        n_batches: b,
        few_batches: b < 10,
    })
}

/// Sample autocorrelations at lags `0..=max_lag`.
pub fn acf(path: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = path.len();
    if n <= max_lag {
        return Err(Error::InsufficientSample(format!(
            "acf up to lag {max_lag} needs more than {max_lag} values, got {n}"
        )));
    }
    let mean = path.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = path.iter().map(|v| v - mean).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>();
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::Numerical("acf of a path with zero variance".into()));
    }
    Ok((0..=max_lag)
        .map(|k| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect())
}

/// Fraction of accepted proposals.
pub fn acceptance_rate(decisions: &[bool]) -> Result<f64> {
    if decisions.is_empty() {
        return Err(Error::InsufficientSample("no proposals recorded".into()));
    }
    Ok(decisions.iter().filter(|&&a| a).count() as f64 / decisions.len() as f64)
}
