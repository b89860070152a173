//! Constrained log-densities sampled by HMC.

use crate::crisis_events::{LinearConstraint, ReducedVarTarget};
use crate::error::Result;
use crate::loss_models::JointLossModel;

/// Initial states must clear every constraint by at least this much.
pub const FEASIBILITY_MARGIN: f64 = 1e-12;

/// An unnormalized log-density restricted to a polyhedron.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// `log π(x)`; `−∞` outside the support.
    fn log_density(&self, x: &[f64]) -> f64;

    /// `∇ log π(x)` written into `out`.
    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn constraints(&self) -> &[LinearConstraint];

    fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.constraints().iter().all(|c| c.slack(x) >= FEASIBILITY_MARGIN)
    }

    fn feasible(&self, x: &[f64]) -> bool {
        self.constraints().iter().all(|c| c.satisfied(x))
    }
}

/// The joint density restricted to a crisis event given by half-spaces.
#[derive(Debug, Clone)]
pub struct EventTarget {
    pub model: JointLossModel,
    pub constraints: Vec<LinearConstraint>,
}

impl EventTarget {
    pub fn new(model: JointLossModel, constraints: Vec<LinearConstraint>) -> Self {
        EventTarget { model, constraints }
    }
}

impl Target for EventTarget {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.feasible(x) {
            return f64::NEG_INFINITY;
        }
        self.model.logpdf(x)
    }

    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if !self.model.in_support(x) {
            return Err(crate::error::domain(format!("gradient outside the support at {x:?}")));
        }
        self.model.grad_logpdf_into(x, out);
        Ok(())
    }

    fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }
}

impl Target for ReducedVarTarget {
    fn dim(&self) -> usize {
        ReducedVarTarget::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        ReducedVarTarget::log_density(self, x)
    }

    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if !self.model.in_support(&self.lift(x)) {
            return Err(crate::error::domain(format!("gradient outside the support at {x:?}")));
        }
        self.grad(x, out);
        Ok(())
    }

    fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }
}

/// Standard normal in `dim` coordinates, optionally with constraints.
#[derive(Debug, Clone)]
pub struct StandardNormalTarget {
    pub dim: usize,
    pub constraints: Vec<LinearConstraint>,
}

impl StandardNormalTarget {
    pub fn new(dim: usize) -> Self {
        StandardNormalTarget {
            dim,
            constraints: Vec::new(),
        }
    }
}

impl Target for StandardNormalTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if !self.feasible(x) {
            return f64::NEG_INFINITY;
        }
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -v;
        }
        Ok(())
    }

    fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }
}
