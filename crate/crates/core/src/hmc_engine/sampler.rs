//! The HMC transition kernel.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::integrator::leapfrog_reflect_cached;
use super::target::Target;
use crate::error::{domain, invalid, Result};
use crate::exec::{derive_seed, stream_rng, Execution};
use crate::matrix::{norm_sq, SampleMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcParams {
    pub eps: f64,
    /// Leapfrog steps per proposal.
    #[serde(rename = "t")]
    pub steps: usize,
}

impl HmcParams {
    pub fn new(eps: f64, steps: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) || steps == 0 {
            return Err(invalid(format!("HMC needs eps > 0 and T ≥ 1, got ({eps}, {steps})")));
        }
        Ok(HmcParams { eps, steps })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HmcDiagnostics {
    pub acr: f64,
    /// `H(proposal) − H(current)` per iteration; `NaN` when the trajectory failed.
    pub hamiltonian_errors: Vec<f64>,
    pub accepted: Vec<bool>,
    pub reflections_per_proposal: Vec<usize>,
    /// Proposals rejected because of a non-finite energy or a failed gradient.
    pub flagged: usize,
}

#[derive(Debug, Clone)]
pub struct HmcOutput {
    pub path: SampleMatrix,
    pub diagnostics: HmcDiagnostics,
}

/// `U = −log π` and `∇U` for a target.
pub(crate) fn potential<T: Target + ?Sized>(target: &T) -> impl FnMut(&[f64], &mut [f64]) -> Result<()> + '_ {
    move |x, g| {
        target.grad_log_density(x, g)?;
        g.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }
}

/// Runs `n` HMC iterations from `x0`; the chain is a deterministic function of `seed`.
pub fn hmc_sample<T: Target + ?Sized>(
    target: &T,
    params: &HmcParams,
    x0: &[f64],
    n: usize,
    seed: u64,
) -> Result<HmcOutput> {
    let d = target.dim();
    if x0.len() != d {
        return Err(invalid(format!(
            "initial state has {} coordinates, target {d}",
            x0.len()
        )));
    }
    if !target.strictly_feasible(x0) {
        return Err(domain("initial HMC state is not strictly feasible"));
    }
    let mut u = -target.log_density(x0);
    if !u.is_finite() {
        return Err(domain("target density is not finite at the initial state"));
    }
    let mut grad_u = potential(target);
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    grad_u(&x, &mut g)?;

    let mut rng = stream_rng(seed, 0);
    let mut path = SampleMatrix::with_capacity(d, n);
    let mut diag = HmcDiagnostics {
        hamiltonian_errors: Vec::with_capacity(n),
        accepted: Vec::with_capacity(n),
        reflections_per_proposal: Vec::with_capacity(n),
        ..Default::default()
    };
    let (mut xn, mut pn, mut gn) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let constraints = target.constraints();

    for _ in 0..n {
        for v in pn.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let h0 = u + 0.5 * norm_sq(&pn);
        xn.copy_from_slice(&x);
        gn.copy_from_slice(&g);
        let mut refl = 0;
        let mut ok = true;
        for _ in 0..params.steps {
            match leapfrog_reflect_cached(&mut xn, &mut pn, &mut gn, params.eps, &mut grad_u, constraints) {
                Ok(k) => refl += k,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        let un = if ok { -target.log_density(&xn) } else { f64::NAN };
        let dh = un + 0.5 * norm_sq(&pn) - h0;
        let log_u: f64 = rng.random::<f64>().ln();
        let accept = if dh.is_finite() {
            log_u < -dh
        } else {
            diag.flagged += 1;
            false
        };
        if accept {
            std::mem::swap(&mut x, &mut xn);
            std::mem::swap(&mut g, &mut gn);
            u = un;
        }
        path.push_row(&x);
        diag.hamiltonian_errors.push(if ok { dh } else { f64::NAN });
        diag.accepted.push(accept);
        diag.reflections_per_proposal.push(refl);
    }
    diag.acr = if n == 0 {
        0.0
    } else {
        diag.accepted.iter().filter(|&&a| a).count() as f64 / n as f64
    };
    Ok(HmcOutput {
        path,
        diagnostics: diag,
    })
}

/// Independent chains from a common start, chain `c` seeded by `derive_seed(seed, c)`.
pub fn hmc_sample_chains<T: Target + ?Sized>(
    target: &T,
    params: &HmcParams,
    x0: &[f64],
    n: usize,
    chains: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<HmcOutput>> {
    exec.map(chains, |c| {
        hmc_sample(target, params, x0, n, derive_seed(seed, c as u64))
    })
    .into_iter()
    .collect()
}
