//! Invariance of the HMC and Gibbs kernels against i.i.d. conditional Monte Carlo.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use sysrisk::crisis_events::{estimate_event, CrisisEventSpec};
use sysrisk::exec::stream_rng;
use sysrisk::gibbs_engine::{full_conditional_sample, BandEvent};
use sysrisk::harness::{run, Engine, ModelSource, RunConfig};
use sysrisk::loss_models::JointSpec;
use sysrisk::mc_engine::subselect;
use sysrisk::{CopulaModel, Execution, JointLossModel, MarginalModel, SampleMatrix};

/// 1% two-sided critical value of the asymptotic Kolmogorov distribution.
const KS_1PCT: f64 = 1.6276;

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

fn gpd_pair(copula: CopulaModel) -> JointLossModel {
    let g = MarginalModel::gpd(0.3, 1.0).unwrap();
    JointLossModel::new(vec![g.clone(), g], copula).unwrap()
}

#[test]
fn hmc_marginals_match_conditional_mc() {
    let model = gpd_pair(CopulaModel::independence(2).unwrap());
    let spec = CrisisEventSpec::rvar(0.5, 0.9).unwrap();
    let thinned = 1000;
    let crit = KS_1PCT * (2.0 / thinned as f64).sqrt();
    let rejections: Vec<[bool; 2]> = Execution::Parallel.map(20, |s| {
        let mut cfg = RunConfig::new(
            ModelSource::Inline(JointSpec::from(model.clone())),
            spec.clone(),
            Engine::Hmc,
        );
        cfg.seed = 300 + s as u64;
        cfg.n_mcmc = 10 * thinned;
        cfg.execution = Execution::Sequential;
        let out = run(&cfg).unwrap();
        let mc = model.sample(20_000, 7_000 + s as u64, Execution::Sequential);
        let cond = subselect(&out.report.event, &mc).unwrap();
        assert!(cond.nrows() >= thinned);
        [0, 1].map(|j| {
            let a: Vec<f64> = out.samples.column(j).into_iter().step_by(10).collect();
            ks_two_sample(a, cond.column(j)[..thinned].to_vec()) > crit
        })
    });
    for j in 0..2 {
        let r = rejections.iter().filter(|s| s[j]).count();
        assert!(r <= 1, "margin {j}: {r} of 20 KS rejections");
    }
}

/// Cell index on a grid of marginal quantiles.
fn cell(x: &[f64], cuts: &[Vec<f64>; 2]) -> usize {
    let idx = |v: f64, c: &[f64]| c.iter().filter(|&&q| v > q).count();
    idx(x[0], &cuts[0]) * (cuts[1].len() + 1) + idx(x[1], &cuts[1])
}

fn quantile_cuts(col: &[f64], bins: usize) -> Vec<f64> {
    let mut v = col.to_vec();
    v.sort_by(f64::total_cmp);
    (1..bins).map(|k| v[k * v.len() / bins]).collect()
}

fn histogram(s: &SampleMatrix, cuts: &[Vec<f64>; 2], cells: usize) -> Vec<f64> {
    let mut h = vec![0.0; cells];
    for x in s.rows() {
        h[cell(x, cuts)] += 1.0;
    }
    h
}

#[test]
fn gibbs_kernel_preserves_target_histogram() {
    let model = gpd_pair(CopulaModel::survival_clayton(2, 2.0).unwrap());
    let spec = CrisisEventSpec::rvar(0.5, 0.9).unwrap();
    let big = model.sample(400_000, 1, Execution::Parallel);
    let event = estimate_event(&spec, &big, model.support_class()).unwrap();
    let band = BandEvent::try_from(&event).unwrap();
    let reference = subselect(&event, &big).unwrap();
    let bins = 5;
    let cuts = [
        quantile_cuts(&reference.column(0), bins),
        quantile_cuts(&reference.column(1), bins),
    ];
    let cells = bins * bins;
    let ref_hist = histogram(&reference, &cuts, cells);
    let ref_total: f64 = ref_hist.iter().sum();

    let p_values: Vec<f64> = Execution::Parallel.map(20, |s| {
        let draws = model.sample(60_000, 100 + s as u64, Execution::Sequential);
        let mut pts = subselect(&event, &draws).unwrap();
        let mut rng = stream_rng(500 + s as u64, 0);
        for i in 0..pts.nrows() {
            let j = usize::from(rng.random::<f64>() < 0.5);
            let u: f64 = rng.random();
            let x = pts.row(i).to_vec();
            pts.row_mut(i)[j] = full_conditional_sample(&model, j, &x, &band, u).unwrap();
        }
        for x in pts.rows() {
            assert!(band.contains(x) && x.iter().all(|&v| v >= 0.0));
        }
        let hist = histogram(&pts, &cuts, cells);
        let n = pts.nrows() as f64;
        let (mut stat, mut used) = (0.0, 0usize);
        for (o, r) in hist.iter().zip(&ref_hist) {
            let e = n * r / ref_total;
            if e >= 5.0 {
                stat += (o - e).powi(2) / e;
                used += 1;
            }
        }
        1.0 - ChiSquared::new((used - 1) as f64).unwrap().cdf(stat)
    });
    let passes = p_values.iter().filter(|&&p| p > 0.01).count();
    assert!(
        passes >= 19,
        "chi-square p > 0.01 in {passes} of 20 seeds: {p_values:?}"
    );
}
