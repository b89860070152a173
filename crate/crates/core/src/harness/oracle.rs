use nalgebra::DVector;

use crate::crisis_events::{CrisisEventSpec, EventKind};
use crate::error::{invalid, Error, Result};
use crate::loss_models::special::{norm_pdf, norm_quantile, t_pdf, t_quantile};
use crate::loss_models::{CopulaModel, JointLossModel, MarginalModel};

enum Generator {
    Normal,
    T(f64),
}

impl Generator {
    fn quantile(&self, p: f64) -> f64 {
        match *self {
            Generator::Normal => norm_quantile(p),
            Generator::T(nu) => t_quantile(p, nu),
        }
    }

    /// `E[Z; Z > q]` for the standardized generator.
    fn tail_integral(&self, q: f64) -> f64 {
        if q == f64::INFINITY {
            return 0.0;
        }
        match *self {
            Generator::Normal => norm_pdf(q),
            Generator::T(nu) => t_pdf(q, nu) * (nu + q * q) / (nu - 1.0),
        }
    }
}

/// Locations, scales and generator of a multivariate normal or t model.
fn elliptical_parts(model: &JointLossModel) -> Result<(Vec<f64>, Vec<f64>, Generator)> {
    let not_elliptical = || {
        Error::Capability(
            "the elliptical oracle needs a Gaussian copula with normal marginals or a t copula with matching t marginals"
                .into(),
        )
    };
    let mut loc = Vec::new();
    let mut scale = Vec::new();
    let gen = match model.copula() {
        CopulaModel::Gaussian(_) => {
            for m in model.marginals() {
                match *m {
                    MarginalModel::Normal { mean, sd } => {
                        loc.push(mean);
                        scale.push(sd);
                    }
                    _ => return Err(not_elliptical()),
                }
            }
            Generator::Normal
        }
        CopulaModel::StudentT { nu, .. } => {
            for m in model.marginals() {
                match *m {
                    MarginalModel::StudentT {
                        nu: mnu,
                        loc: l,
                        scale: s,
                    } if mnu == *nu => {
                        loc.push(l);
                        scale.push(s);
                    }
                    _ => return Err(not_elliptical()),
                }
            }
            Generator::T(*nu)
        }
        _ => return Err(not_elliptical()),
    };
    Ok((loc, scale, gen))
}

/// Risk-contribution allocation `E[X | event]` of a multivariate normal or t model,
/// `μ + Σ1/(1ᵀΣ1)·(ρ(S) − 1ᵀμ)`. VaR events use the exact quantile (no band).
pub fn elliptical_oracle(model: &JointLossModel, spec: &CrisisEventSpec) -> Result<Vec<f64>> {
    let spec = spec.clone().validated()?;
    let (loc, scale, gen) = elliptical_parts(model)?;
    if let Generator::T(nu) = gen {
        if nu <= 1.0 && spec.kind != EventKind::Var {
            return Err(invalid("tail expectations need ν > 1"));
        }
    }
    let corr = model.copula().correlation().expect("elliptical copula");
    let sd = DVector::from_vec(scale);
    let sigma_one = corr * &sd;
    let sigma_one = sigma_one.component_mul(&sd);
    let total: f64 = sigma_one.sum();
    let s = total.sqrt();
    let r = match (spec.kind, spec.levels.as_slice()) {
        (EventKind::Var, [a]) => gen.quantile(*a),
        (EventKind::Es, [a]) => gen.tail_integral(gen.quantile(*a)) / (1.0 - a),
        (EventKind::Rvar, [a1, a2]) => {
            let q2 = if *a2 >= 1.0 { f64::INFINITY } else { gen.quantile(*a2) };
            (gen.tail_integral(gen.quantile(*a1)) - gen.tail_integral(q2)) / (a2 - a1)
        }
        _ => unreachable!("validated"),
    };
    Ok(loc
        .iter()
        .zip(sigma_one.iter())
        .map(|(m, c)| m + c / total * s * r)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_models::presets;
    use nalgebra::DMatrix;

    fn mvn(mean: Vec<f64>, sd: Vec<f64>, corr: DMatrix<f64>) -> JointLossModel {
        let m = mean
            .iter()
            .zip(&sd)
            .map(|(&a, &b)| MarginalModel::normal(a, b).unwrap())
            .collect();
        JointLossModel::new(m, CopulaModel::gaussian(corr).unwrap()).unwrap()
    }

    #[test]
    fn identity_equal_split() {
        let m = mvn(vec![0.0; 3], vec![1.0; 3], DMatrix::identity(3, 3));
        let es = elliptical_oracle(&m, &CrisisEventSpec::es(0.99).unwrap()).unwrap();
        // ES_0.99 of N(0, 3): √3·φ(q)/0.01.
        let want = 3f64.sqrt() * norm_pdf(norm_quantile(0.99)) / 0.01 / 3.0;
        for v in es {
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn var_event_sums_to_quantile() {
        let m = mvn(
            vec![1.0, 2.0],
            vec![1.0, 3.0],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        );
        let a = elliptical_oracle(&m, &CrisisEventSpec::var(0.95, 0.0).unwrap()).unwrap();
        let s = (1.0f64 + 9.0 + 2.0 * 1.5).sqrt();
        assert!((a.iter().sum::<f64>() - (3.0 + s * norm_quantile(0.95))).abs() < 1e-12);
    }

    #[test]
    fn m2_matches_bias_implied_values() {
        // MC estimates minus reported biases give the oracle to three decimals.
        let a = elliptical_oracle(&presets::m2(), &CrisisEventSpec::es(0.99).unwrap()).unwrap();
        for (got, want) in a.iter().zip([3.741, 3.117, 3.741]) {
            assert!((got - want).abs() < 2e-3, "{a:?}");
        }
        assert!((a[1] / a[0] - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rvar_full_range_is_es() {
        let m = presets::m2();
        let es = elliptical_oracle(&m, &CrisisEventSpec::es(0.9).unwrap()).unwrap();
        let rv = elliptical_oracle(&m, &CrisisEventSpec::rvar(0.9, 1.0).unwrap()).unwrap();
        for (a, b) in es.iter().zip(&rv) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_elliptical_rejected() {
        assert!(matches!(
            elliptical_oracle(&presets::m1(), &CrisisEventSpec::es(0.99).unwrap()),
            Err(Error::Capability(_))
        ));
    }
}
