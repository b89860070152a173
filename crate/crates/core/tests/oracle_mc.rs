//! Closed-form elliptical allocations against large Monte Carlo samples.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

use sysrisk::crisis_events::CrisisEventSpec;
use sysrisk::exec::stream_rng;
use sysrisk::harness::elliptical_oracle;
use sysrisk::loss_models::presets;
use sysrisk::mc_engine::{mc_allocate, McRunConfig};
use sysrisk::risk_measures::MarginalRiskMeasure;
use sysrisk::{CopulaModel, Execution, JointLossModel, MarginalModel};

#[test]
fn t6eq5_es_oracle_matches_large_mc() {
    let model = presets::preset("t6eq-5").unwrap();
    let spec = CrisisEventSpec::es(0.99).unwrap();
    let oracle = elliptical_oracle(&model, &spec).unwrap();
    let cfg = McRunConfig::new(2_000_000, 61, spec, vec![MarginalRiskMeasure::Mean; 5]);
    let mc = mc_allocate(&model, &cfg, Execution::Parallel).unwrap();
    for (j, (e, o)) in mc.estimates.iter().zip(&oracle).enumerate() {
        assert!(
            (e.point - o).abs() <= 3.0 * e.se,
            "coordinate {j}: MC {} ± {} vs oracle {o}",
            e.point,
            e.se
        );
    }
}

/// Multivariate t with dispersion `Σ = D R D`, drawn directly as `D L z / sqrt(W/ν)`.
struct DirectT {
    nu: f64,
    chol: DMatrix<f64>,
}

impl DirectT {
    fn draw<R: Rng>(&self, rng: &mut R, chi: &ChiSquared<f64>) -> DVector<f64> {
        let d = self.chol.nrows();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w: f64 = chi.sample(rng);
        &self.chol * z / (w / self.nu).sqrt()
    }
}

#[test]
fn sigma_one_proportionality_against_direct_simulation() {
    let (nu, rho, d) = (6.0, 0.3, 3);
    let corr = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho });
    let scale = [2.0, 1.0, 1.0];
    let marginals = scale
        .iter()
        .map(|&s| MarginalModel::student_t(nu, 0.0, s).unwrap())
        .collect();
    let model = JointLossModel::new(marginals, CopulaModel::student_t(nu, corr.clone()).unwrap()).unwrap();
    let alpha = 0.99;
    let oracle = elliptical_oracle(&model, &CrisisEventSpec::es(alpha).unwrap()).unwrap();

    // Σ1 = (5.2, 1.9, 1.9) when the first row and column of R are doubled.
    let shares: Vec<f64> = oracle.iter().map(|a| a / oracle.iter().sum::<f64>()).collect();
    for (s, want) in shares.iter().zip([5.2 / 9.0, 1.9 / 9.0, 1.9 / 9.0]) {
        assert!((s - want).abs() < 1e-12, "{shares:?}");
    }

    let dm = DMatrix::from_diagonal(&DVector::from_row_slice(&scale));
    let sigma = &dm * &corr * &dm;
    let total = sigma.sum();
    let threshold = total.sqrt() * StudentsT::new(0.0, 1.0, nu).unwrap().inverse_cdf(alpha);
    let sampler = DirectT {
        nu,
        chol: sigma.cholesky().unwrap().l(),
    };
    let chunks = 10;
    let per_chunk = 1_000_000;
    let partial: Vec<(usize, Vec<f64>, Vec<f64>)> = Execution::Parallel.map(chunks, |c| {
        let mut rng = stream_rng(2718, c as u64);
        let chi = ChiSquared::new(nu).unwrap();
        let (mut k, mut s1, mut s2) = (0usize, vec![0.0; d], vec![0.0; d]);
        for _ in 0..per_chunk {
            let x = sampler.draw(&mut rng, &chi);
            if x.sum() >= threshold {
                k += 1;
                for j in 0..d {
                    s1[j] += x[j];
                    s2[j] += x[j] * x[j];
                }
            }
        }
        (k, s1, s2)
    });
    let k: usize = partial.iter().map(|p| p.0).sum();
    for j in 0..d {
        let s1: f64 = partial.iter().map(|p| p.1[j]).sum();
        let s2: f64 = partial.iter().map(|p| p.2[j]).sum();
        let mean = s1 / k as f64;
        let se = ((s2 / k as f64 - mean * mean) / k as f64).sqrt();
        assert!(
            (mean - oracle[j]).abs() <= 3.0 * se,
            "coordinate {j}: MC {mean} ± {se} vs oracle {}",
            oracle[j]
        );
    }
}
