//! Named models.

use nalgebra::DMatrix;

use super::copula::CopulaModel;
use super::joint::JointLossModel;
use super::marginal::MarginalModel;
use crate::error::{invalid, Result};

/// Names accepted by [`preset`], with a one-line description each.
pub const PRESETS: &[(&str, &str)] = &[
    ("M1", "GPD(0.3, 1) marginals, survival Clayton copula θ = 2, d = 3"),
    ("M2", "multivariate t, ν = 5, ρ_ij = |i − j|/3, d = 3"),
    (
        "M3",
        "Pareto(14036, 1.122) and Pareto(14219, 2.118), survival Clayton θ = 0.512",
    ),
    ("t6eq-<d>", "multivariate t, ν = 6, equicorrelation 1/12, dimension d"),
];

pub fn m1() -> JointLossModel {
    let g = MarginalModel::gpd(0.3, 1.0).expect("valid");
    JointLossModel::new(
        vec![g.clone(), g.clone(), g],
        CopulaModel::survival_clayton(3, 2.0).expect("valid"),
    )
    .expect("valid")
}

/// Multivariate t with `ν` degrees of freedom and dispersion matrix `corr`.
pub fn multivariate_t(nu: f64, corr: DMatrix<f64>) -> Result<JointLossModel> {
    let d = corr.nrows();
    let t = MarginalModel::student_t(nu, 0.0, 1.0)?;
    JointLossModel::new(vec![t; d], CopulaModel::student_t(nu, corr)?)
}

pub fn m2() -> JointLossModel {
    let d = 3;
    let corr = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            (i as f64 - j as f64).abs() / d as f64
        }
    });
    multivariate_t(5.0, corr).expect("valid")
}

pub fn m3() -> JointLossModel {
    JointLossModel::new(
        vec![
            MarginalModel::pareto(14036.0, 1.122).expect("valid"),
            MarginalModel::pareto(14219.0, 2.118).expect("valid"),
        ],
        CopulaModel::survival_clayton(2, 0.512).expect("valid"),
    )
    .expect("valid")
}

pub fn t6_equicorrelated(d: usize) -> Result<JointLossModel> {
    let corr = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 1.0 / 12.0 });
    multivariate_t(6.0, corr)
}

/// Looks up a model by name (case-insensitive).
pub fn preset(name: &str) -> Result<JointLossModel> {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "m1" => Ok(m1()),
        "m2" => Ok(m2()),
        "m3" => Ok(m3()),
        _ => {
            if let Some(d) = lower.strip_prefix("t6eq-") {
                let d: usize = d
                    .parse()
                    .map_err(|_| invalid(format!("bad dimension in preset name {name:?}")))?;
                return t6_equicorrelated(d);
            }
            Err(invalid(format!("unknown preset {name:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(preset("m1").unwrap().dim(), 3);
        assert_eq!(preset("M3").unwrap().dim(), 2);
        assert_eq!(preset("t6eq-5").unwrap().dim(), 5);
        assert!(preset("t6eq-x").is_err());
        assert!(preset("m9").is_err());
    }

    #[test]
    fn m2_dispersion() {
        let c = m2().copula().correlation().unwrap().clone();
        assert_eq!(c[(0, 1)], 1.0 / 3.0);
        assert_eq!(c[(0, 2)], 2.0 / 3.0);
        assert_eq!(c[(1, 1)], 1.0);
    }
}
