use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Engine, RunConfig};
use crate::crisis_events::{estimate_event, reduce_var_event, ConcreteCrisisEvent, CrisisEventSpec, EventKind};
use crate::error::{domain, Error, Result};
use crate::exec::{derive_seed, tags};
use crate::gibbs_engine::{rsgs_sample, rsgs_tune, BandEvent, GibbsDiagnostics, GibbsParams};
use crate::hmc_engine::{
    hmc_sample, tune, EventTarget, HmcDiagnostics, HmcParams, StandardizedTarget, Standardizer, Target, TuneResult,
};
use crate::loss_models::JointLossModel;
use crate::matrix::SampleMatrix;
use crate::mc_engine::{mc_allocate_presample, mc_presample, subselect, McRunConfig, Presample};
use crate::risk_measures::{batch_means_se, empirical_quantile, MarginalRiskMeasure};

/// Half-width of the aggregate-loss band whose presample rows, rescaled onto `1·x = v*`,
/// seed standardization and tuning for a VaR event given with `delta = 0`.
pub const VAR_TUNING_DELTA: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateEstimate {
    pub coordinate: usize,
    pub measure: MarginalRiskMeasure,
    pub point: f64,
    pub se: f64,
    pub n_batches: usize,
    pub few_batches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McMeta {
    /// Conditional draws used.
    pub k: usize,
    /// Event actually used after any widening.
    pub event_used: CrisisEventSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcMeta {
    pub params: HmcParams,
    /// `None` when the parameters came from the configuration.
    pub tuning: Option<TuneResult>,
    pub acr: f64,
    pub reflections: usize,
    pub flagged: usize,
    pub reduced_var_target: bool,
    pub standardizer_jittered: bool,
    /// Presample rows used for standardization and tuning.
    pub tuning_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsMeta {
    pub params: GibbsParams,
    pub tuned: bool,
    pub thin_capped: bool,
    pub prerun_acf: Vec<Vec<f64>>,
    pub degenerate_redraws: usize,
    pub acr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hmc: Option<HmcMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gibbs: Option<GibbsMeta>,
}

/// Deterministic summary of a run; wall-clock times live in [`Timing`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub model: String,
    pub engine: Engine,
    pub seed: u64,
    pub n_mc: usize,
    pub n_mcmc: usize,
    pub event: ConcreteCrisisEvent,
    pub estimates: Vec<CoordinateEstimate>,
    pub engine_meta: EngineMeta,
    pub log: Vec<String>,
}

impl AllocationReport {
    pub fn points(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.point).collect()
    }

    pub fn ses(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.se).collect()
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub presample: f64,
    pub tuning: f64,
    /// Sampling phase: the chain for MCMC engines, draws plus subselection for MC.
    pub sampling: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub enum ChainDiagnostics {
    Mc,
    Hmc(HmcDiagnostics),
    Gibbs {
        last_coordinate: Vec<usize>,
        diagnostics: GibbsDiagnostics,
    },
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: AllocationReport,
    /// Conditional MC sample or MCMC path, in loss coordinates.
    pub samples: SampleMatrix,
    pub diagnostics: ChainDiagnostics,
    pub timing: Timing,
}

/// Tuned sampler parameters, as emitted by the `tune` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum TunedParams {
    Hmc {
        params: HmcParams,
        tuning: TuneResult,
    },
    Gibbs {
        params: GibbsParams,
        thin_capped: bool,
        prerun_acf: Vec<Vec<f64>>,
    },
}

struct Prepared {
    model: JointLossModel,
    measures: Vec<MarginalRiskMeasure>,
    presample: Presample,
    presample_secs: f64,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let model = cfg.model.resolve()?;
    cfg.check_compatibility(&model)?;
    let measures = cfg.measures_for(model.dim())?;
    let start = Instant::now();
    let presample = mc_presample(&model, cfg.n_mc, derive_seed(cfg.seed, tags::PRESAMPLE), cfg.execution)?;
    Ok(Prepared {
        model,
        measures,
        presample,
        presample_secs: start.elapsed().as_secs_f64(),
    })
}

fn column_estimates(path: &SampleMatrix, measures: &[MarginalRiskMeasure]) -> Result<Vec<CoordinateEstimate>> {
    measures
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let e = batch_means_se(&path.column(j), m)?;
            Ok(CoordinateEstimate {
                coordinate: j,
                measure: m,
                point: e.point,
                se: e.se,
                n_batches: e.n_batches,
                few_batches: e.few_batches,
            })
        })
        .collect()
}

/// HMC target, conditional presample in target coordinates, and the lift back to losses.
struct HmcSetup {
    target: Box<dyn Target>,
    points: SampleMatrix,
    reduced_v: Option<f64>,
}

fn hmc_setup(model: &JointLossModel, event: &ConcreteCrisisEvent, pre: &Presample, var_band: bool) -> Result<HmcSetup> {
    if var_band && event.kind() == EventKind::Var {
        let target = EventTarget::new(model.clone(), event.sampling_constraints()?);
        return Ok(HmcSetup {
            target: Box::new(target),
            points: subselect(event, &pre.sample)?,
            reduced_v: None,
        });
    }
    if let Some(v) = event.sum_equality {
        let target = reduce_var_event(model, v)?;
        let (lo, hi) = match event.band {
            Some(b) => b,
            None => {
                let a = event.spec.levels[0];
                (
                    empirical_quantile(&pre.row_sums, (a - VAR_TUNING_DELTA).max(0.0))?,
                    empirical_quantile(&pre.row_sums, (a + VAR_TUNING_DELTA).min(1.0))?,
                )
            }
        };
        let d = model.dim();
        let mut points = SampleMatrix::with_capacity(d - 1, 0);
        for (row, &s) in pre.sample.rows().zip(&pre.row_sums) {
            if s >= lo && s <= hi && s > 0.0 {
                let scaled: Vec<f64> = row[..d - 1].iter().map(|x| x * v / s).collect();
                if target.strictly_feasible(&scaled) {
                    points.push_row(&scaled);
                }
            }
        }
        Ok(HmcSetup {
            target: Box::new(target),
            points,
            reduced_v: Some(v),
        })
    } else {
        let target = EventTarget::new(model.clone(), event.constraints.clone());
        let points = subselect(event, &pre.sample)?;
        Ok(HmcSetup {
            target: Box::new(target),
            points,
            reduced_v: None,
        })
    }
}

fn starting_point(points: &SampleMatrix, what: &str) -> Result<Vec<f64>> {
    if points.nrows() <= points.dim() {
        return Err(Error::InsufficientSample(format!(
            "only {} presample points in the crisis event for {what}; increase n_mc",
            points.nrows()
        )));
    }
    Ok(points.column_means())
}

struct HmcTuned<'a> {
    st: StandardizedTarget<'a, dyn Target>,
    params: HmcParams,
    tuning: Option<TuneResult>,
    y0: Vec<f64>,
}

fn hmc_tune<'a>(cfg: &RunConfig, setup: &'a HmcSetup) -> Result<HmcTuned<'a>> {
    let x0 = starting_point(&setup.points, "hmc")?;
    if !setup.target.strictly_feasible(&x0) || !setup.target.log_density(&x0).is_finite() {
        return Err(domain(
            "the conditional presample mean is not strictly inside the crisis event",
        ));
    }
    let st = StandardizedTarget::new(setup.target.as_ref(), Standardizer::from_sample(&setup.points)?)?;
    let y0 = st.standardizer.to_y(&x0);
    let (params, tuning) = match cfg.overrides.hmc {
        Some(p) => (HmcParams::new(p.eps, p.steps)?, None),
        None => {
            let ys = st.standardizer.sample_to_y(&setup.points);
            let mut tc = cfg.tuning.hmc();
            if setup.reduced_v.is_some() {
                tc.acceptance_dim = Some(st.dim() + 1);
            }
            let r = tune(&st, &ys, &tc, derive_seed(cfg.seed, tags::TUNE), cfg.execution)?;
            (r.params, Some(r))
        }
    };
    Ok(HmcTuned { st, params, tuning, y0 })
}

struct GibbsTuned {
    band: BandEvent,
    params: GibbsParams,
    tuned: bool,
    thin_capped: bool,
    prerun_acf: Vec<Vec<f64>>,
    start: Vec<f64>,
}

fn gibbs_tune(
    cfg: &RunConfig,
    model: &JointLossModel,
    event: &ConcreteCrisisEvent,
    pre: &Presample,
) -> Result<GibbsTuned> {
    let band = BandEvent::try_from(event)?;
    let points = subselect(event, &pre.sample)?;
    let x0 = starting_point(&points, "gibbs")?;
    if let Some(p) = &cfg.overrides.gibbs {
        return Ok(GibbsTuned {
            band,
            params: p.clone().validated()?,
            tuned: false,
            thin_capped: false,
            prerun_acf: Vec::new(),
            start: x0,
        });
    }
    let t = rsgs_tune(
        model,
        &band,
        &points,
        &x0,
        cfg.tuning.n_pre,
        cfg.tuning.rho_target,
        cfg.seed,
    )?;
    Ok(GibbsTuned {
        band,
        params: t.params,
        tuned: true,
        thin_capped: t.thin_capped,
        prerun_acf: t.prerun_acf,
        start: t.start,
    })
}

/// Tunes the configured MCMC engine without sampling.
pub fn tune_only(cfg: &RunConfig) -> Result<TunedParams> {
    let prep = prepare(cfg)?;
    let event = estimate_event(&cfg.event, &prep.presample.sample, prep.model.support_class())?;
    match cfg.engine {
        Engine::Mc => Err(Error::Config("mc has no tunable parameters".into())),
        Engine::Hmc => {
            let mut c = cfg.clone();
            c.overrides.hmc = None;
            let setup = hmc_setup(&prep.model, &event, &prep.presample, cfg.hmc_var_band)?;
            let t = hmc_tune(&c, &setup)?;
            Ok(TunedParams::Hmc {
                params: t.params,
                tuning: t.tuning.expect("tuned"),
            })
        }
        Engine::Gibbs => {
            let mut c = cfg.clone();
            c.overrides.gibbs = None;
            let t = gibbs_tune(&c, &prep.model, &event, &prep.presample)?;
            Ok(TunedParams::Gibbs {
                params: t.params,
                thin_capped: t.thin_capped,
                prerun_acf: t.prerun_acf,
            })
        }
    }
}

/// Runs the full pipeline: presample, event, engine, estimates.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let total = Instant::now();
    let prep = prepare(cfg)?;
    let Prepared {
        model,
        measures,
        presample,
        presample_secs,
    } = prep;
    let mut log = Vec::new();
    let mut timing = Timing {
        presample: presample_secs,
        ..Default::default()
    };
    let mut meta = EngineMeta::default();

    let (event, samples, estimates, diagnostics) = match cfg.engine {
        Engine::Mc => {
            let mut spec = cfg.event.clone();
            let res = loop {
                let mcfg = McRunConfig::new(cfg.n_mc, cfg.seed, spec.clone(), measures.clone());
                match mc_allocate_presample(&presample, &model, &mcfg) {
                    Ok(r) => break r,
                    Err(Error::InsufficientSample(msg)) => {
                        let wider = spec.widened(0.01).map_err(|_| Error::InsufficientSample(msg.clone()))?;
                        log.push(format!(
                            "fewer than 100 conditional draws at levels {:?} (delta {}); widened to {:?} (delta {})",
                            spec.levels, spec.delta, wider.levels, wider.delta
                        ));
                        spec = wider;
                    }
                    Err(e) => return Err(e),
                }
            };
            timing.sampling = presample_secs + res.runtime;
            let estimates = res
                .estimates
                .iter()
                .zip(&measures)
                .enumerate()
                .map(|(j, (e, &m))| CoordinateEstimate {
                    coordinate: j,
                    measure: m,
                    point: e.point,
                    se: e.se,
                    n_batches: e.n_batches,
                    few_batches: e.few_batches,
                })
                .collect();
            meta.mc = Some(McMeta {
                k: res.k,
                event_used: spec,
            });
            (res.event, res.conditional_sample, estimates, ChainDiagnostics::Mc)
        }
        Engine::Hmc => {
            let event = estimate_event(&cfg.event, &presample.sample, model.support_class())?;
            let t0 = Instant::now();
            let setup = hmc_setup(&model, &event, &presample, cfg.hmc_var_band)?;
            let tuned = hmc_tune(cfg, &setup)?;
            timing.tuning = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let out = hmc_sample(
                &tuned.st,
                &tuned.params,
                &tuned.y0,
                cfg.n_mcmc,
                derive_seed(cfg.seed, tags::HMC_CHAIN),
            )?;
            timing.sampling = t1.elapsed().as_secs_f64();
            let xs = tuned.st.standardizer.sample_to_x(&out.path);
            let path = match setup.reduced_v {
                Some(v) => {
                    let mut lifted = SampleMatrix::with_capacity(model.dim(), xs.nrows());
                    for r in xs.rows() {
                        let mut row = r.to_vec();
                        row.push(v - r.iter().sum::<f64>());
                        lifted.push_row(&row);
                    }
                    lifted
                }
                None => xs,
            };
            let mut estimates = column_estimates(&path, &measures)?;
            let d = model.dim();
            if let (Some(v), MarginalRiskMeasure::Mean) = (setup.reduced_v, measures[d - 1]) {
                estimates[d - 1].point = v - estimates[..d - 1].iter().map(|e| e.point).sum::<f64>();
            }
            let diag = out.diagnostics;
            meta.hmc = Some(HmcMeta {
                params: tuned.params,
                tuning: tuned.tuning.clone(),
                acr: diag.acr,
                reflections: diag.reflections_per_proposal.iter().sum(),
                flagged: diag.flagged,
                reduced_var_target: setup.reduced_v.is_some(),
                standardizer_jittered: tuned.st.standardizer.jittered,
                tuning_points: setup.points.nrows(),
            });
            if setup.reduced_v.is_some() && event.band.is_none() {
                log.push(format!(
                    "tuning points: presample rows with aggregate loss in the α ± {VAR_TUNING_DELTA} band, rescaled onto 1·x = v*"
                ));
            }
            if let Some(t) = &tuned.tuning {
                if t.capped > 0 {
                    log.push(format!(
                        "{} tuning trajectories reached t_max without a U-turn",
                        t.capped
                    ));
                }
            }
            (event, path, estimates, ChainDiagnostics::Hmc(diag))
        }
        Engine::Gibbs => {
            let event = estimate_event(&cfg.event, &presample.sample, model.support_class())?;
            let t0 = Instant::now();
            let tuned = gibbs_tune(cfg, &model, &event, &presample)?;
            timing.tuning = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let out = rsgs_sample(
                &model,
                &tuned.band,
                &tuned.params,
                &tuned.start,
                cfg.n_mcmc,
                derive_seed(cfg.seed, tags::GIBBS_CHAIN),
            )?;
            timing.sampling = t1.elapsed().as_secs_f64();
            let estimates = column_estimates(&out.path, &measures)?;
            if tuned.thin_capped {
                log.push("thinning interval hit its cap of n_pre/4".into());
            }
            meta.gibbs = Some(GibbsMeta {
                params: tuned.params,
                tuned: tuned.tuned,
                thin_capped: tuned.thin_capped,
                prerun_acf: tuned.prerun_acf,
                degenerate_redraws: out.diagnostics.degenerate_redraws,
                acr: 1.0,
            });
            (
                event,
                out.path,
                estimates,
                ChainDiagnostics::Gibbs {
                    last_coordinate: out.last_coordinate,
                    diagnostics: out.diagnostics,
                },
            )
        }
    };
    timing.total = total.elapsed().as_secs_f64();
    Ok(RunOutput {
        report: AllocationReport {
            model: cfg.model.label(),
            engine: cfg.engine,
            seed: cfg.seed,
            n_mc: cfg.n_mc,
            n_mcmc: cfg.n_mcmc,
            event,
            estimates,
            engine_meta: meta,
            log,
        },
        samples,
        diagnostics,
        timing,
    })
}
