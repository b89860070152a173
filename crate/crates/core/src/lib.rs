//! Estimators of systemic risk allocations: risk measures of the marginal losses of a
//! portfolio conditional on a crisis event of the aggregate loss.
//!
//! Three engines are provided: plain Monte Carlo, Hamiltonian Monte Carlo with
//! reflection at linear constraints, and random-scan Gibbs sampling.

pub mod crisis_events;
pub mod error;
pub mod exec;
pub mod gibbs_engine;
pub mod harness;
pub mod hmc_engine;
pub mod loss_models;
pub mod matrix;
pub mod mc_engine;
pub mod risk_measures;

pub use error::{Error, Result};
pub use exec::Execution;
pub use loss_models::{CopulaModel, JointLossModel, MarginalModel};
pub use matrix::SampleMatrix;
