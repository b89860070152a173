//! End-to-end acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use sysrisk::crisis_events::{estimate_event, CrisisEventSpec};
use sysrisk::exec::stream_rng;
use sysrisk::harness::{elliptical_oracle, run, Engine, ModelSource, RunConfig, RunOutput};
use sysrisk::hmc_engine::{hmc_sample, leapfrog_reflect, EventTarget, HmcParams, StandardNormalTarget, Target};
use sysrisk::loss_models::{presets, JointSpec};
use sysrisk::mc_engine::subselect;
use sysrisk::{CopulaModel, Execution, JointLossModel, MarginalModel};

fn verdict(n: usize, pass: bool, elapsed: Duration, budget: Duration, detail: String) {
    let ok = pass && elapsed <= budget;
    println!(
        "criterion {n}: {}  ({detail}; {:.1}s of {:.0}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(ok, "criterion {n} failed: {detail}");
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

struct Timed {
    out: RunOutput,
    elapsed: Duration,
}

fn timed_run(cfg: &RunConfig) -> Timed {
    let t = Instant::now();
    let out = run(cfg).expect("run");
    Timed {
        out,
        elapsed: t.elapsed(),
    }
}

fn m1_var_hmc() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = RunConfig::preset("M1", CrisisEventSpec::var(0.99, 0.001).unwrap(), Engine::Hmc);
        cfg.seed = 2024;
        timed_run(&cfg)
    })
}

fn m1_rvar_hmc() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = RunConfig::preset("M1", CrisisEventSpec::rvar(0.975, 0.99).unwrap(), Engine::Hmc);
        cfg.seed = 2024;
        timed_run(&cfg)
    })
}

fn exchangeable(points: &[f64], ses: &[f64]) -> bool {
    (0..points.len()).all(|i| (0..i).all(|j| (points[i] - points[j]).abs() <= 3.0 * (ses[i] + ses[j])))
}

#[test]
fn criterion_01_full_allocation_identity() {
    let r = m1_var_hmc();
    let v_star = r.out.report.event.sum_equality.expect("VaR event");
    let total: f64 = r.out.report.points().iter().sum();
    let rel = ((total - v_star) / v_star).abs();
    verdict(
        1,
        rel <= 1e-9,
        r.elapsed,
        secs(120),
        format!("Σ Â = {total:.12}, v* = {v_star:.12}, rel {rel:.1e}"),
    );
}

#[test]
fn criterion_02_exchangeability() {
    let var = m1_var_hmc();
    let rvar = m1_rvar_hmc();
    let (pv, sv) = (var.out.report.points(), var.out.report.ses());
    let (pr, sr) = (rvar.out.report.points(), rvar.out.report.ses());
    let pass = exchangeable(&pv, &sv)
        && exchangeable(&pr, &sr)
        && pv.iter().all(|v| (9.0..=10.2).contains(v))
        && pr.iter().all(|v| (7.4..=8.2).contains(v));
    verdict(
        2,
        pass,
        var.elapsed.max(rvar.elapsed),
        secs(180),
        format!("VaR {pv:.3?} ± {sv:.3?}; RVaR {pr:.3?} ± {sr:.3?}"),
    );
}

#[test]
fn criterion_03_elliptical_oracle_bias() {
    let t = Instant::now();
    let spec = CrisisEventSpec::es(0.99).unwrap();
    let oracle = elliptical_oracle(&presets::preset("t6eq-5").unwrap(), &spec).unwrap();
    let runs = Execution::Parallel.map(10, |s| {
        let mut cfg = RunConfig::preset("t6eq-5", spec.clone(), Engine::Gibbs);
        cfg.seed = 100 + s as u64;
        cfg.execution = Execution::Sequential;
        run(&cfg).expect("run")
    });
    let mut hits = 0;
    for r in &runs {
        for (e, o) in r.report.estimates.iter().zip(&oracle) {
            if (e.point - o).abs() <= 3.0 * e.se {
                hits += 1;
            }
        }
    }
    verdict(
        3,
        hits >= 45,
        t.elapsed(),
        secs(600),
        format!("{hits}/50 within 3 SE of {oracle:.4?}"),
    );
}

#[test]
fn criterion_04_variance_advantage() {
    let hmc = m1_var_hmc();
    let t = Instant::now();
    let mut cfg = RunConfig::preset("M1", CrisisEventSpec::var(0.99, 0.001).unwrap(), Engine::Mc);
    cfg.seed = 2024;
    let mc = run(&cfg).expect("mc run");
    let (sh, sm) = (hmc.out.report.ses(), mc.report.ses());
    let ratios: Vec<f64> = sm.iter().zip(&sh).map(|(m, h)| m / h).collect();
    verdict(
        4,
        ratios.iter().all(|&r| r >= 5.0),
        hmc.elapsed + t.elapsed(),
        secs(300),
        format!("MC SE {sm:.4?}, HMC SE {sh:.4?}, ratios {ratios:.1?}"),
    );
}

#[test]
fn criterion_05_tuned_acr() {
    let r = m1_rvar_hmc();
    let meta = r.out.report.engine_meta.hmc.as_ref().expect("hmc meta");
    verdict(
        5,
        meta.acr >= 0.95 && r.out.report.n_mcmc == 10_000,
        r.elapsed,
        secs(180),
        format!(
            "ACR {:.4} with (ε, T) = ({:.4}, {})",
            meta.acr, meta.params.eps, meta.params.steps
        ),
    );
}

#[test]
fn criterion_06_energy_error_scaling() {
    let t = Instant::now();
    let target = StandardNormalTarget::new(3);
    let eps = [0.4f64, 0.2, 0.1];
    let logs: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let steps = (2.0 / e).round() as usize;
            let out = hmc_sample(&target, &HmcParams::new(e, steps).unwrap(), &[0.0; 3], 10_000, 6).unwrap();
            let h = &out.diagnostics.hamiltonian_errors;
            let mean = h.iter().map(|v| v.abs()).sum::<f64>() / h.len() as f64;
            (e.ln(), mean.ln())
        })
        .collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    verdict(
        6,
        (1.7..=2.3).contains(&slope),
        t.elapsed(),
        secs(60),
        format!("slope {slope:.3}"),
    );
}

#[test]
fn criterion_07_reversibility() {
    let t = Instant::now();
    let model = presets::m1();
    let pre = model.sample(100_000, 70, Execution::default());
    let event = estimate_event(
        &CrisisEventSpec::rvar(0.975, 0.99).unwrap(),
        &pre,
        model.support_class(),
    )
    .unwrap();
    let points = subselect(&event, &pre).unwrap();
    let target = EventTarget::new(model, event.constraints.clone());
    let grad_u = |x: &[f64], g: &mut [f64]| {
        target.grad_log_density(x, g)?;
        g.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    };
    let mut rng = stream_rng(7, 0);
    let (mut cases, mut worst, mut attempts) = (0, 0.0f64, 0);
    while cases < 1000 && attempts < 100_000 {
        attempts += 1;
        let x0 = points.row(rng.random_range(0..points.nrows())).to_vec();
        if !target.strictly_feasible(&x0) {
            continue;
        }
        let p0: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let eps = rng.random_range(0.01..0.3);
        let steps = rng.random_range(1..=20);
        let (mut x, mut p) = (x0.clone(), p0.clone());
        let mut refl = 0;
        let mut ok = true;
        for _ in 0..steps {
            match leapfrog_reflect(&mut x, &mut p, eps, grad_u, target.constraints()) {
                Ok(k) => refl += k,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || refl > 3 {
            continue;
        }
        p.iter_mut().for_each(|v| *v = -*v);
        for _ in 0..steps {
            leapfrog_reflect(&mut x, &mut p, eps, grad_u, target.constraints()).expect("backward step");
        }
        let err = x
            .iter()
            .zip(&x0)
            .chain(p.iter().map(|v| -v).collect::<Vec<_>>().iter().zip(&p0))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        cases += 1;
    }
    verdict(
        7,
        cases == 1000 && worst <= 1e-8,
        t.elapsed(),
        secs(60),
        format!("{cases} cases, max-norm error {worst:.2e}"),
    );
}

fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
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

#[test]
fn criterion_08_gibbs_stationarity() {
    let t = Instant::now();
    let g = MarginalModel::gpd(0.3, 1.0).unwrap();
    let model = JointLossModel::new(vec![g.clone(), g], CopulaModel::independence(2).unwrap()).unwrap();
    let spec = CrisisEventSpec::rvar(0.5, 0.9).unwrap();
    let n = 10_000usize;
    let crit = (-(0.005f64).ln() / 2.0).sqrt() * (2.0 / n as f64).sqrt();
    let seeds: Vec<[bool; 2]> = Execution::Parallel.map(20, |s| {
        let mut cfg = RunConfig::new(
            ModelSource::Inline(JointSpec::from(model.clone())),
            spec.clone(),
            Engine::Gibbs,
        );
        cfg.seed = 800 + s as u64;
        cfg.n_mcmc = n;
        cfg.execution = Execution::Sequential;
        let out = run(&cfg).expect("gibbs run");
        let mc = model.sample(40_000, 9_000 + s as u64, Execution::Sequential);
        let cond = subselect(&out.report.event, &mc).unwrap();
        assert!(cond.nrows() >= n);
        [0, 1].map(|j| {
            let mut a = out.samples.column(j);
            let mut b = cond.column(j)[..n].to_vec();
            ks_two_sample(&mut a, &mut b) <= crit
        })
    });
    let per_margin = [0, 1].map(|j| seeds.iter().filter(|s| s[j]).count());
    verdict(
        8,
        per_margin.iter().all(|&c| c >= 19),
        t.elapsed(),
        secs(300),
        format!("KS passes per margin {per_margin:?} of 20 at D ≤ {crit:.4}"),
    );
}

#[test]
fn criterion_09_hfunction_and_gradient() {
    let t = Instant::now();
    let names = ["M1", "M2", "M3", "t6eq-5"];
    let mut worst_roundtrip = 0.0f64;
    let mut worst_grad = 0.0f64;
    let mut rng = stream_rng(9, 0);
    for name in names {
        let model = presets::preset(name).unwrap();
        let c = model.copula();
        let d = c.dim();
        // |h(h⁻¹(p)) − p| over a random grid of p and conditioning vectors.
        for _ in 0..200 {
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(0.001..0.999)).collect();
            let p: f64 = rng.random_range(0.001..0.999);
            for j in 0..d {
                let rest: Vec<f64> = u.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect();
                let uj = c.hfun_inv(j, p, &rest).unwrap();
                let back = c.hfun(j, uj, &rest).unwrap();
                worst_roundtrip = worst_roundtrip.max((back - p).abs());
            }
        }
        let xs = model.sample(100, 19, Execution::Sequential);
        for x in xs.rows() {
            let g = model.grad_logpdf(x).unwrap();
            for j in 0..d {
                let h = 1e-5 * x[j].abs().max(1e-2);
                let (mut a, mut b) = (x.to_vec(), x.to_vec());
                a[j] += h;
                b[j] -= h;
                let fd = (model.logpdf(&a) - model.logpdf(&b)) / (2.0 * h);
                let scale = g[j].abs().max(1e-300);
                worst_grad = worst_grad.max((fd - g[j]).abs() / scale);
            }
        }
    }
    verdict(
        9,
        worst_roundtrip <= 1e-8 && worst_grad <= 1e-5,
        t.elapsed(),
        secs(60),
        format!("h roundtrip {worst_roundtrip:.1e}, gradient relative error {worst_grad:.1e}"),
    );
}

#[test]
fn criterion_10_m2_es_reference_allocation() {
    let t = Instant::now();
    let spec = CrisisEventSpec::es(0.99).unwrap();
    let mut cfg = RunConfig::preset("M2", spec.clone(), Engine::Gibbs);
    cfg.seed = 2024;
    let out = run(&cfg).expect("run");
    let oracle = elliptical_oracle(&presets::m2(), &spec).unwrap();
    let published = [3.735, 3.126, 3.738];
    let (pts, ses) = (out.report.points(), out.report.ses());
    let pass =
        (0..3).all(|j| (pts[j] - published[j]).abs() <= 3.0 * ses[j] && (pts[j] - oracle[j]).abs() <= 3.0 * ses[j]);
    verdict(
        10,
        pass,
        t.elapsed(),
        secs(180),
        format!("estimates {pts:.4?} ± {ses:.4?}; oracle {oracle:.4?}"),
    );
}
