//! Marginal distributions, copulas and their joint composition.

pub mod copula;
pub mod joint;
pub mod marginal;
pub mod presets;
pub mod special;

pub use copula::{CopulaModel, CopulaSpec};
pub use joint::{ConditionalFn, JointLossModel, JointSpec, SupportClass};
pub use marginal::{MarginalFn, MarginalModel, Support};
pub use presets::preset;
