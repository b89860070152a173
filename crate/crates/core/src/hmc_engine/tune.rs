//! Presample-driven choice of stepsize and integration time.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::integrator::leapfrog_reflect_cached;
use super::sampler::{potential, HmcParams};
use super::target::Target;
use crate::error::{Error, Result};
use crate::exec::{stream_rng, Execution};
use crate::matrix::{norm_sq, SampleMatrix};

/// Smallest stepsize tried before giving up.
const MIN_EPS: f64 = 1e-12;

/// `(1 + (d − 1)·0.65)/d`.
pub fn target_acceptance(d: usize) -> f64 {
    (1.0 + (d as f64 - 1.0) * 0.65) / d as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub c_eps: f64,
    pub t_max: usize,
    /// Dimension entering the acceptance target instead of the target's own, used for the
    /// reduced VaR target where `d − 1 = 1` would demand `ᾱ = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_dim: Option<usize>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            c_eps: 1.0,
            t_max: 1000,
            acceptance_dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub params: HmcParams,
    pub alpha_bar: f64,
    /// Smallest stepwise acceptance ratio at the accepted stepsize.
    pub alpha_min: f64,
    pub halvings: usize,
    /// Per-trajectory turning points at the accepted stepsize.
    pub turning_points: Vec<usize>,
    /// Trajectories that reached `t_max` without turning.
    pub capped: usize,
    /// Presample points discarded as not strictly feasible.
    pub discarded: usize,
}

struct Trajectory {
    alpha_min: f64,
    turn: usize,
    capped: bool,
}

fn trajectory<T: Target + ?Sized, R: Rng>(target: &T, x0: &[f64], eps: f64, t_max: usize, rng: &mut R) -> Trajectory {
    let d = x0.len();
    let mut p: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    let mut grad_u = potential(target);
    let failed = |turn| Trajectory {
        alpha_min: 0.0,
        turn,
        capped: false,
    };
    if grad_u(&x, &mut g).is_err() {
        return failed(0);
    }
    let mut h_prev = -target.log_density(&x) + 0.5 * norm_sq(&p);
    let mut alpha_min = 1.0f64;
    let mut prev_dist = 0.0;
    let mut prev_delta = 0.0;
    for t in 1..=t_max {
        if leapfrog_reflect_cached(&mut x, &mut p, &mut g, eps, &mut grad_u, target.constraints()).is_err() {
            return failed(t - 1);
        }
        let h = -target.log_density(&x) + 0.5 * norm_sq(&p);
        let alpha = (h_prev - h).exp().min(1.0);
        let alpha = if alpha.is_nan() { 0.0 } else { alpha };
        let dist = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let delta = dist - prev_dist;
        if t >= 2 && delta < 0.0 && prev_delta > 0.0 {
            return Trajectory {
                alpha_min,
                turn: t - 1,
                capped: false,
            };
        }
        alpha_min = alpha_min.min(alpha);
        prev_delta = delta;
        prev_dist = dist;
        h_prev = h;
    }
    Trajectory {
        alpha_min,
        turn: t_max,
        capped: true,
    }
}

/// Halves `ε` from `c_eps·d^{−1/4}` until every trajectory started at a presample point
/// keeps its stepwise acceptance ratio above the target, then sets `T` to the mean turning point.
pub fn tune<T: Target + ?Sized>(
    target: &T,
    presample: &SampleMatrix,
    cfg: &TuneConfig,
    seed: u64,
    exec: Execution,
) -> Result<TuneResult> {
    let d = target.dim();
    if presample.dim() != d {
        return Err(crate::error::invalid(format!(
            "presample has {} columns, target {d}",
            presample.dim()
        )));
    }
    if !(cfg.c_eps > 0.0) || cfg.t_max == 0 || cfg.acceptance_dim == Some(0) {
        return Err(crate::error::invalid("tuning needs c_eps > 0 and t_max ≥ 1"));
    }
    let starts = presample.filter_rows(|r| target.strictly_feasible(r) && target.log_density(r).is_finite());
    if starts.nrows() < 10 {
        return Err(Error::InsufficientSample(format!(
            "tuning needs at least 10 feasible presample points, got {}",
            starts.nrows()
        )));
    }
    let k = starts.nrows();
    let alpha_bar = target_acceptance(cfg.acceptance_dim.unwrap_or(d));
    let mut eps = cfg.c_eps * (d as f64).powf(-0.25);
    let mut worst = 0.0;
    for round in 0u64.. {
        eps /= 2.0;
        if eps < MIN_EPS {
            return Err(Error::Numerical(format!(
                "stepsize fell below {MIN_EPS:e}; worst acceptance ratio {worst}"
            )));
        }
        let runs = exec.map(k, |n| {
            let mut rng = stream_rng(seed, (round << 32) | n as u64);
            trajectory(target, starts.row(n), eps, cfg.t_max, &mut rng)
        });
        let alpha_min = runs.iter().map(|r| r.alpha_min).fold(1.0, f64::min);
        if alpha_min >= alpha_bar {
            let turning_points: Vec<usize> = runs.iter().map(|r| r.turn).collect();
            let mean = turning_points.iter().sum::<usize>() as f64 / k as f64;
            return Ok(TuneResult {
                params: HmcParams::new(eps, (mean.floor() as usize).max(1))?,
                alpha_bar,
                alpha_min,
                halvings: round as usize + 1,
                turning_points,
                capped: runs.iter().filter(|r| r.capped).count(),
                discarded: presample.nrows() - k,
            });
        }
        worst = alpha_min;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmc_engine::target::StandardNormalTarget;

    #[test]
    fn acceptance_target() {
        assert!((target_acceptance(3) - 2.3 / 3.0).abs() < 1e-15);
        assert_eq!(target_acceptance(1), 1.0);
    }

    fn normal_presample(d: usize, n: usize) -> SampleMatrix {
        let mut rng = stream_rng(11, 0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        SampleMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn standard_normal_tuning() {
        let t = StandardNormalTarget::new(3);
        let r = tune(
            &t,
            &normal_presample(3, 200),
            &TuneConfig::default(),
            5,
            Execution::default(),
        )
        .unwrap();
        assert!(r.alpha_min >= r.alpha_bar);
        // The first candidate is 3^{-1/4}/2.
        let first = 3f64.powf(-0.25) / 2.0;
        assert!((r.params.eps * 2f64.powi(r.halvings as i32 - 1) - first).abs() < 1e-12);
        // Half a period of the harmonic oscillator is π, so turning happens near π/ε.
        let turn = std::f64::consts::PI / r.params.eps;
        assert!(
            (r.params.steps as f64) < 1.2 * turn && (r.params.steps as f64) > 0.2 * turn,
            "{r:?}"
        );
        assert_eq!(r.capped, 0);
    }

    #[test]
    fn deterministic_across_execution() {
        let t = StandardNormalTarget::new(2);
        let x = normal_presample(2, 64);
        let a = tune(&t, &x, &TuneConfig::default(), 1, Execution::Sequential).unwrap();
        let b = tune(&t, &x, &TuneConfig::default(), 1, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cap_is_flagged() {
        let t = StandardNormalTarget::new(2);
        let cfg = TuneConfig {
            t_max: 2,
            ..TuneConfig::default()
        };
        let r = tune(&t, &normal_presample(2, 20), &cfg, 1, Execution::Sequential).unwrap();
        assert!(r.capped > 0);
        assert!(r.params.steps <= 2);
    }

    #[test]
    fn acceptance_dimension_override() {
        let t = StandardNormalTarget::new(1);
        let cfg = TuneConfig {
            acceptance_dim: Some(2),
            ..TuneConfig::default()
        };
        let r = tune(&t, &normal_presample(1, 50), &cfg, 2, Execution::Sequential).unwrap();
        assert_eq!(r.alpha_bar, target_acceptance(2));
        assert!(r.alpha_min >= 0.825);
    }

    #[test]
    fn too_few_points() {
        let t = StandardNormalTarget::new(2);
        assert!(tune(
            &t,
            &normal_presample(2, 5),
            &TuneConfig::default(),
            1,
            Execution::Sequential
        )
        .is_err());
    }
}
