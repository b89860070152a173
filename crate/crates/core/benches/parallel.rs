use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sysrisk::crisis_events::{estimate_event, CrisisEventSpec};
use sysrisk::hmc_engine::{hmc_sample_chains, standardize, tune, EventTarget, HmcParams, TuneConfig};
use sysrisk::loss_models::presets::{m1, m2};
use sysrisk::{Execution, SampleMatrix};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn joint_sample(c: &mut Criterion) {
    let mut g = c.benchmark_group("joint_sample_m1_1e5");
    g.sample_size(10);
    let model = m1();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(model.sample(100_000, 1, exec)))
        });
    }
    g.finish();
}

/// M2 ES(0.99) target with its conditional presample.
fn m2_es_setup() -> (EventTarget, SampleMatrix) {
    let model = m2();
    let pre = model.sample(100_000, 7, Execution::Parallel);
    let event = estimate_event(&CrisisEventSpec::es(0.99).unwrap(), &pre, model.support_class()).unwrap();
    let rows: Vec<&[f64]> = pre.rows().filter(|x| event.contains(x)).collect();
    let cond = SampleMatrix::from_rows(&rows).unwrap();
    (EventTarget::new(model, event.sampling_constraints().unwrap()), cond)
}

fn tuning(c: &mut Criterion) {
    let (target, cond) = m2_es_setup();
    let st = standardize(&target, &cond).unwrap();
    let y = st.standardizer.sample_to_y(&cond);
    let mut g = c.benchmark_group("hmc_tune_m2_es");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(tune(&st, &y, &TuneConfig::default(), 3, exec).unwrap()))
        });
    }
    g.finish();
}

fn chains(c: &mut Criterion) {
    let (target, cond) = m2_es_setup();
    let st = standardize(&target, &cond).unwrap();
    let y0 = st.standardizer.to_y(cond.row(0));
    let params = HmcParams::new(0.2, 10).unwrap();
    let mut g = c.benchmark_group("hmc_chains_m2_es_8x1000");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(hmc_sample_chains(&st, &params, &y0, 1000, 8, 5, exec).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, joint_sample, tuning, chains);
criterion_main!(benches);
