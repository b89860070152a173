//! Plain Monte Carlo: simulate, estimate the event, subselect, apply the measures.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::crisis_events::{estimate_event, ConcreteCrisisEvent, CrisisEventSpec};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::loss_models::JointLossModel;
use crate::matrix::SampleMatrix;
use crate::risk_measures::{batch_means_se, EstimateWithSE, MarginalRiskMeasure};

/// Unconditional draws together with the statistics the samplers reuse.
#[derive(Debug, Clone)]
pub struct Presample {
    pub sample: SampleMatrix,
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub row_sums: Vec<f64>,
}

impl Presample {
    pub fn from_sample(sample: SampleMatrix) -> Result<Self> {
        if sample.nrows() < 100 {
            return Err(Error::InsufficientSample(format!(
                "presample needs at least 100 rows, got {}",
                sample.nrows()
            )));
        }
        Ok(Presample {
            mean: sample.column_means(),
            cov: sample.covariance(),
            row_sums: sample.row_sums(),
            sample,
        })
    }
}

pub fn mc_presample(model: &JointLossModel, n: usize, seed: u64, exec: Execution) -> Result<Presample> {
    if n < 100 {
        return Err(Error::InsufficientSample(format!("presample size {n} < 100")));
    }
    Presample::from_sample(model.sample(n, seed, exec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRunConfig {
    pub n: usize,
    pub seed: u64,
    pub spec: CrisisEventSpec,
    pub measures: Vec<MarginalRiskMeasure>,
    #[serde(default = "default_min_conditional")]
    pub min_conditional: usize,
}

fn default_min_conditional() -> usize {
    100
}

impl McRunConfig {
    pub fn new(n: usize, seed: u64, spec: CrisisEventSpec, measures: Vec<MarginalRiskMeasure>) -> Self {
        McRunConfig {
            n,
            seed,
            spec,
            measures,
            min_conditional: default_min_conditional(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub estimates: Vec<EstimateWithSE>,
    pub event: ConcreteCrisisEvent,
    pub conditional_sample: SampleMatrix,
    pub k: usize,
    /// Wall-clock seconds of sampling and subselection.
    pub runtime: f64,
}

/// Rows of `sample` inside the positive-probability version of `event`.
pub fn subselect(event: &ConcreteCrisisEvent, sample: &SampleMatrix) -> Result<SampleMatrix> {
    let constraints = event.sampling_constraints()?;
    Ok(sample.filter_rows(|r| constraints.iter().all(|c| c.satisfied(r))))
}

/// Applies one measure per coordinate with batch-means standard errors.
pub fn estimate_columns(sample: &SampleMatrix, measures: &[MarginalRiskMeasure]) -> Result<Vec<EstimateWithSE>> {
    if measures.len() != sample.dim() {
        return Err(invalid(format!(
            "{} measures for {} coordinates",
            measures.len(),
            sample.dim()
        )));
    }
    measures
        .iter()
        .enumerate()
        .map(|(j, &m)| batch_means_se(&sample.column(j), m))
        .collect()
}

/// Monte Carlo estimator on an existing unconditional sample.
pub fn mc_allocate_presample(presample: &Presample, model: &JointLossModel, cfg: &McRunConfig) -> Result<McResult> {
    let start = Instant::now();
    let event = estimate_event(&cfg.spec, &presample.sample, model.support_class())?;
    let cond = subselect(&event, &presample.sample)?;
    let k = cond.nrows();
    if k < cfg.min_conditional.max(1) {
        return Err(Error::InsufficientSample(format!(
            "only {k} of {} draws fall in the crisis event (need {}); widen the event levels",
            presample.sample.nrows(),
            cfg.min_conditional
        )));
    }
    let estimates = estimate_columns(&cond, &cfg.measures)?;
    Ok(McResult {
        estimates,
        event,
        conditional_sample: cond,
        k,
        runtime: start.elapsed().as_secs_f64(),
    })
}

/// Simulates `cfg.n` draws and runs the Monte Carlo estimator on them.
pub fn mc_allocate(model: &JointLossModel, cfg: &McRunConfig, exec: Execution) -> Result<McResult> {
    let start = Instant::now();
    let pre = mc_presample(model, cfg.n, cfg.seed, exec)?;
    let mut res = mc_allocate_presample(&pre, model, cfg)?;
    res.runtime = start.elapsed().as_secs_f64();
    Ok(res)
}
