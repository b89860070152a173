use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Engine;
use super::run::RunOutput;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub engine: Engine,
    pub coordinate: usize,
    pub estimate: f64,
    /// Estimate minus the oracle; absent without an oracle.
    pub bias: Option<f64>,
    pub se: f64,
    pub time_adjusted_mse: f64,
    /// Sampling-phase seconds.
    pub runtime: f64,
}

/// `b² + σ²/((S_MCMC/S_MC)·N_MCMC)` with `S` the sampling time per draw.
pub fn time_adjusted_mse(bias: Option<f64>, sigma: f64, runtime_ratio: f64, n_mcmc: usize) -> f64 {
    bias.map_or(0.0, |b| b * b) + sigma * sigma / (runtime_ratio * n_mcmc as f64)
}

fn per_draw_seconds(r: &RunOutput) -> f64 {
    let n = if r.report.engine.is_mcmc() {
        r.report.n_mcmc
    } else {
        r.report.n_mc
    };
    r.timing.sampling / n as f64
}

/// One row per run and coordinate. MC rows are time-adjusted against the first MCMC run;
/// without one they reduce to `b² + se²`.
pub fn compare(runs: &[RunOutput], oracle: Option<&[f64]>) -> Result<Vec<ComparisonRow>> {
    let d = runs.first().map_or(0, |r| r.report.estimates.len());
    if runs.iter().any(|r| r.report.estimates.len() != d) {
        return Err(invalid("runs to compare have different dimensions"));
    }
    if oracle.is_some_and(|o| o.len() != d) {
        return Err(invalid("oracle length does not match the model dimension"));
    }
    let reference = runs.iter().find(|r| r.report.engine.is_mcmc());
    let mut rows = Vec::new();
    for r in runs {
        let (ratio, n_eff, n_own) = match (r.report.engine.is_mcmc(), reference) {
            (true, _) => (1.0, r.report.n_mcmc, r.report.n_mcmc),
            (false, Some(m)) => {
                let ratio = per_draw_seconds(m) / per_draw_seconds(r);
                let ratio = if ratio.is_finite() && ratio > 0.0 { ratio } else { 1.0 };
                (ratio, m.report.n_mcmc, r.report.n_mc)
            }
            (false, None) => (1.0, r.report.n_mc, r.report.n_mc),
        };
        for (j, e) in r.report.estimates.iter().enumerate() {
            let bias = oracle.map(|o| e.point - o[j]);
            let sigma = e.se * (n_own as f64).sqrt();
            rows.push(ComparisonRow {
                engine: r.report.engine,
                coordinate: j,
                estimate: e.point,
                bias,
                se: e.se,
                time_adjusted_mse: time_adjusted_mse(bias, sigma, ratio, n_eff),
                runtime: r.timing.sampling,
            });
        }
    }
    Ok(rows)
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "engine",
        "coordinate",
        "estimate",
        "bias",
        "se",
        "time_adjusted_mse",
        "runtime",
    ])?;
    for r in rows {
        w.write_record([
            r.engine.to_string(),
            (r.coordinate + 1).to_string(),
            r.estimate.to_string(),
            r.bias.map_or_else(String::new, |b| b.to_string()),
            r.se.to_string(),
            r.time_adjusted_mse.to_string(),
            r.runtime.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
