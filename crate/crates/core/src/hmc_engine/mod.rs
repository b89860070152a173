//! Hamiltonian Monte Carlo with reflection at linear constraints.

mod integrator;
mod sampler;
mod standardize;
mod target;
mod tune;

pub use integrator::{leapfrog, leapfrog_reflect, MAX_REFLECTIONS};
pub use sampler::{hmc_sample, hmc_sample_chains, HmcDiagnostics, HmcOutput, HmcParams};
pub use standardize::{standardize, StandardizedTarget, Standardizer};
pub use target::{EventTarget, StandardNormalTarget, Target, FEASIBILITY_MARGIN};
pub use tune::{target_acceptance, tune, TuneConfig, TuneResult};
