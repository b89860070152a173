use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crisis_events::{CrisisEventSpec, EventKind};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gibbs_engine::GibbsParams;
use crate::hmc_engine::{HmcParams, TuneConfig};
use crate::loss_models::{preset, JointLossModel, JointSpec, SupportClass};
use crate::risk_measures::MarginalRiskMeasure;

/// A preset name or an inline model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Preset(String),
    Inline(JointSpec),
}

impl ModelSource {
    pub fn resolve(&self) -> Result<JointLossModel> {
        match self {
            ModelSource::Preset(name) => preset(name),
            ModelSource::Inline(spec) => JointLossModel::try_from(spec.clone()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSource::Preset(name) => name.clone(),
            ModelSource::Inline(_) => "inline".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Mc,
    Hmc,
    Gibbs,
}

impl Engine {
    pub fn is_mcmc(self) -> bool {
        self != Engine::Mc
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Mc => "mc",
            Engine::Hmc => "hmc",
            Engine::Gibbs => "gibbs",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mc" => Ok(Engine::Mc),
            "hmc" => Ok(Engine::Hmc),
            "gibbs" | "gs" => Ok(Engine::Gibbs),
            _ => Err(Error::Config(format!(
                "unknown engine {s:?}; expected mc, hmc or gibbs"
            ))),
        }
    }
}

/// Fixed sampler parameters that bypass tuning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmc: Option<HmcParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gibbs: Option<GibbsParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningSettings {
    #[serde(default = "default_c_eps")]
    pub c_eps: f64,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_n_pre")]
    pub n_pre: usize,
    #[serde(default = "default_rho")]
    pub rho_target: f64,
}

fn default_c_eps() -> f64 {
    1.0
}
fn default_t_max() -> usize {
    1000
}
fn default_n_pre() -> usize {
    100
}
fn default_rho() -> f64 {
    0.15
}

impl Default for TuningSettings {
    fn default() -> Self {
        TuningSettings {
            c_eps: default_c_eps(),
            t_max: default_t_max(),
            n_pre: default_n_pre(),
            rho_target: default_rho(),
        }
    }
}

impl TuningSettings {
    pub fn hmc(&self) -> TuneConfig {
        TuneConfig {
            c_eps: self.c_eps,
            t_max: self.t_max,
            acceptance_dim: None,
        }
    }
}

fn default_n_mc() -> usize {
    100_000
}
fn default_n_mcmc() -> usize {
    10_000
}

/// One allocation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSource,
    pub event: CrisisEventSpec,
    /// One measure per coordinate, or a single measure for all; empty means `mean`.
    #[serde(default)]
    pub measures: Vec<MarginalRiskMeasure>,
    pub engine: Engine,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_n_mcmc")]
    pub n_mcmc: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub tuning: TuningSettings,
    #[serde(default)]
    pub execution: Execution,
    /// Run HMC on the `δ`-band of a VaR event instead of the reduced target on `1·x = v*`.
    #[serde(default)]
    pub hmc_var_band: bool,
}

impl RunConfig {
    pub fn new(model: ModelSource, event: CrisisEventSpec, engine: Engine) -> Self {
        RunConfig {
            model,
            event,
            measures: Vec::new(),
            engine,
            n_mc: default_n_mc(),
            n_mcmc: default_n_mcmc(),
            seed: 0,
            output_dir: None,
            overrides: Overrides::default(),
            tuning: TuningSettings::default(),
            execution: Execution::default(),
            hmc_var_band: false,
        }
    }

    pub fn preset(name: &str, event: CrisisEventSpec, engine: Engine) -> Self {
        Self::new(ModelSource::Preset(name.into()), event, engine)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The per-coordinate measures for a `d`-dimensional model.
    pub fn measures_for(&self, d: usize) -> Result<Vec<MarginalRiskMeasure>> {
        let m = match self.measures.len() {
            0 => vec![MarginalRiskMeasure::Mean; d],
            1 => vec![self.measures[0]; d],
            n if n == d => self.measures.clone(),
            n => return Err(Error::Config(format!("{n} measures given for a {d}-dimensional model"))),
        };
        m.into_iter().map(MarginalRiskMeasure::validated).collect()
    }

    /// Rejects engine/event/model combinations that cannot run, naming the rule.
    pub fn check_compatibility(&self, model: &JointLossModel) -> Result<()> {
        let spec = self.event.clone().validated()?;
        if self.n_mc < 100 {
            return Err(Error::Config(format!(
                "n_mc = {} is below the minimum presample size 100",
                self.n_mc
            )));
        }
        if self.engine.is_mcmc() && self.n_mcmc == 0 {
            return Err(Error::Config("n_mcmc must be positive".into()));
        }
        match (self.engine, spec.kind) {
            (Engine::Mc, EventKind::Var) if spec.delta == 0.0 => Err(Error::Config(
                "mc + VaR event with delta = 0: the event has probability zero; set delta > 0".into(),
            )),
            (Engine::Gibbs, EventKind::Var) => Err(Error::Capability(
                "gibbs + VaR equality event is unsupported; use hmc or an RVaR/ES event".into(),
            )),
            (Engine::Hmc, EventKind::Var) if self.hmc_var_band && spec.delta == 0.0 => {
                Err(Error::Config("hmc on the VaR band needs delta > 0".into()))
            }
            (Engine::Hmc, EventKind::Var)
                if !self.hmc_var_band && model.support_class() != SupportClass::PureLosses =>
            {
                Err(Error::Capability(
                    "hmc + VaR event requires a pure-loss model for the reduced target".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}
