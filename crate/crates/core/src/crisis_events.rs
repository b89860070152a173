//! Crisis events as conjunctions of linear constraints, and their geometry.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::loss_models::{JointLossModel, SupportClass};
use crate::matrix::{dot, norm_sq, SampleMatrix};
use crate::risk_measures::empirical_quantile;

/// Relative tolerance of the VaR sum equality.
pub const SUM_EQUALITY_TOL: f64 = 1e-9;

/// Half-space `h·x ≥ v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub h: Vec<f64>,
    pub v: f64,
}

impl LinearConstraint {
    pub fn new(h: Vec<f64>, v: f64) -> Result<Self> {
        if h.iter().all(|&c| c == 0.0) || h.iter().any(|c| !c.is_finite()) || v.is_nan() {
            return Err(invalid("constraint normal must be finite and nonzero"));
        }
        Ok(LinearConstraint { h, v })
    }

    /// `e_j·x ≥ 0` in dimension `d`.
    pub fn nonnegative(d: usize, j: usize) -> Self {
        let mut h = vec![0.0; d];
        h[j] = 1.0;
        LinearConstraint { h, v: 0.0 }
    }

    /// `s·(1·x) ≥ s·v` with `s = ±1`.
    pub fn sum(d: usize, sign: f64, v: f64) -> Self {
        LinearConstraint {
            h: vec![sign; d],
            v: sign * v,
        }
    }

    /// `h·x − v`; nonnegative iff satisfied.
    pub fn slack(&self, x: &[f64]) -> f64 {
        dot(&self.h, x) - self.v
    }

    pub fn satisfied(&self, x: &[f64]) -> bool {
        self.slack(x) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Var,
    Rvar,
    Es,
}

/// Crisis event on the aggregate loss `S = 1·X`, before its thresholds are estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrisisEventSpec {
    pub kind: EventKind,
    /// `[α]` for VaR and ES, `[α1, α2]` for RVaR.
    pub levels: Vec<f64>,
    /// Half-width of the band replacing the VaR event in plain Monte Carlo.
    #[serde(default)]
    pub delta: f64,
}

impl CrisisEventSpec {
    pub fn var(alpha: f64, delta: f64) -> Result<Self> {
        Self {
            kind: EventKind::Var,
            levels: vec![alpha],
            delta,
        }
        .validated()
    }

    pub fn rvar(alpha1: f64, alpha2: f64) -> Result<Self> {
        Self {
            kind: EventKind::Rvar,
            levels: vec![alpha1, alpha2],
            delta: 0.0,
        }
        .validated()
    }

    pub fn es(alpha: f64) -> Result<Self> {
        Self {
            kind: EventKind::Es,
            levels: vec![alpha],
            delta: 0.0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match (self.kind, self.levels.as_slice()) {
            (EventKind::Var | EventKind::Es, [a]) => *a > 0.0 && *a < 1.0,
            (EventKind::Rvar, [a1, a2]) => *a1 > 0.0 && a1 < a2 && *a2 <= 1.0,
            _ => false,
        };
        if !ok || !(self.delta >= 0.0) {
            return Err(invalid(format!("invalid crisis event {self:?}")));
        }
        if self.kind == EventKind::Var && self.delta > 0.0 {
            let a = self.levels[0];
            if a - self.delta <= 0.0 || a + self.delta >= 1.0 {
                return Err(invalid(format!("VaR band α ± δ = {a} ± {} leaves (0, 1)", self.delta)));
            }
        }
        Ok(self)
    }

    /// Probability of the event (of its band for VaR).
    pub fn nominal_probability(&self) -> f64 {
        match self.kind {
            EventKind::Var => 2.0 * self.delta,
            EventKind::Rvar => self.levels[1] - self.levels[0],
            EventKind::Es => 1.0 - self.levels[0],
        }
    }

    /// Lowers the lower level by `step`; used to widen events with too few MC hits.
    pub fn widened(&self, step: f64) -> Result<Self> {
        let mut s = self.clone();
        match s.kind {
            EventKind::Var => s.delta += step,
            EventKind::Rvar | EventKind::Es => s.levels[0] -= step,
        }
        s.validated()
    }
}

/// A crisis event with estimated thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteCrisisEvent {
    #[serde(flatten)]
    pub spec: CrisisEventSpec,
    pub dim: usize,
    /// Quantiles of the aggregate loss at the event levels.
    pub thresholds: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    /// `1·x = v*` for VaR events.
    pub sum_equality: Option<f64>,
    /// Band `[VaR_{α−δ}, VaR_{α+δ}]` of a VaR event with `δ > 0`.
    pub band: Option<(f64, f64)>,
}

fn coordinate_constraints(d: usize, support: SupportClass) -> Vec<LinearConstraint> {
    match support {
        SupportClass::PureLosses => (0..d).map(|j| LinearConstraint::nonnegative(d, j)).collect(),
        SupportClass::Pnl => Vec::new(),
    }
}

impl ConcreteCrisisEvent {
    /// Builds the event from known thresholds: `[v*]`, `[v1, v2]` or `[v1]`, plus the
    /// band for VaR events with `δ > 0`.
    pub fn from_thresholds(
        spec: CrisisEventSpec,
        dim: usize,
        thresholds: Vec<f64>,
        band: Option<(f64, f64)>,
        support: SupportClass,
    ) -> Result<Self> {
        let spec = spec.validated()?;
        let mut constraints = Vec::new();
        let mut sum_equality = None;
        match (spec.kind, thresholds.as_slice()) {
            (EventKind::Var, [v]) => sum_equality = Some(*v),
            (EventKind::Rvar, [v1, v2]) => {
                if v1 > v2 {
                    return Err(invalid(format!("RVaR thresholds out of order: {v1} > {v2}")));
                }
                constraints.push(LinearConstraint::sum(dim, 1.0, *v1));
                constraints.push(LinearConstraint::sum(dim, -1.0, *v2));
            }
            (EventKind::Es, [v]) => constraints.push(LinearConstraint::sum(dim, 1.0, *v)),
            _ => return Err(invalid("threshold count does not match the event kind")),
        }
        constraints.extend(coordinate_constraints(dim, support));
        Ok(ConcreteCrisisEvent {
            spec,
            dim,
            thresholds,
            constraints,
            sum_equality,
            band,
        })
    }

    pub fn kind(&self) -> EventKind {
        self.spec.kind
    }

    /// Membership in the event itself (with the sum equality for VaR).
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || !self.constraints.iter().all(|c| c.satisfied(x)) {
            return false;
        }
        match self.sum_equality {
            Some(v) => (x.iter().sum::<f64>() - v).abs() <= SUM_EQUALITY_TOL * v.abs().max(1.0),
            None => true,
        }
    }

    /// Constraints of the positive-probability event used for subselection: the VaR band
    /// for VaR events, the event itself otherwise.
    pub fn sampling_constraints(&self) -> Result<Vec<LinearConstraint>> {
        if self.kind() != EventKind::Var {
            return Ok(self.constraints.clone());
        }
        let (lo, hi) = self
            .band
            .ok_or_else(|| Error::Config("the VaR event has probability zero; subselection needs delta > 0".into()))?;
        let mut c = vec![
            LinearConstraint::sum(self.dim, 1.0, lo),
            LinearConstraint::sum(self.dim, -1.0, hi),
        ];
        c.extend(self.constraints.iter().cloned());
        Ok(c)
    }

    /// Aggregate-loss interval `[v1, v2]` of the sampling event.
    pub fn sum_bounds(&self) -> Result<(f64, f64)> {
        match self.kind() {
            EventKind::Var => self.band.ok_or_else(|| {
                Error::Config("the VaR event has probability zero; subselection needs delta > 0".into())
            }),
            EventKind::Rvar => Ok((self.thresholds[0], self.thresholds[1])),
            EventKind::Es => Ok((self.thresholds[0], f64::INFINITY)),
        }
    }
}

/// Estimates the event thresholds from the row sums of an unconditional presample.
pub fn estimate_event(
    spec: &CrisisEventSpec,
    presample: &SampleMatrix,
    support: SupportClass,
) -> Result<ConcreteCrisisEvent> {
    let spec = spec.clone().validated()?;
    let n = presample.nrows();
    if n < 100 {
        return Err(Error::InsufficientSample(format!(
            "event estimation needs at least 100 presample rows, got {n}"
        )));
    }
    let sums = presample.row_sums();
    let thresholds = spec
        .levels
        .iter()
        .map(|&a| empirical_quantile(&sums, a))
        .collect::<Result<Vec<_>>>()?;
    let band = if spec.kind == EventKind::Var && spec.delta > 0.0 {
        let a = spec.levels[0];
        Some((
            empirical_quantile(&sums, a - spec.delta)?,
            empirical_quantile(&sums, a + spec.delta)?,
        ))
    } else {
        None
    };
    ConcreteCrisisEvent::from_thresholds(spec, presample.dim(), thresholds, band, support)
}

/// The VaR-event target in `d − 1` coordinates: `x' ↦ f_X(x', v* − 1·x')`.
#[derive(Debug, Clone)]
pub struct ReducedVarTarget {
    pub model: JointLossModel,
    pub v_star: f64,
    pub constraints: Vec<LinearConstraint>,
}

/// Reduces a pure-loss model conditioned on `1·X = v*` to its first `d − 1` coordinates.
pub fn reduce_var_event(model: &JointLossModel, v_star: f64) -> Result<ReducedVarTarget> {
    if model.support_class() != SupportClass::PureLosses {
        return Err(Error::Capability(
            "the reduced VaR target requires pure losses; P&L models are not supported".into(),
        ));
    }
    let dp = model.dim() - 1;
    let mut constraints: Vec<LinearConstraint> = (0..dp).map(|j| LinearConstraint::nonnegative(dp, j)).collect();
    constraints.push(LinearConstraint::sum(dp, -1.0, v_star));
    Ok(ReducedVarTarget {
        model: model.clone(),
        v_star,
        constraints,
    })
}

impl ReducedVarTarget {
    pub fn dim(&self) -> usize {
        self.model.dim() - 1
    }

    /// `(x', v* − 1·x')`.
    pub fn lift(&self, xp: &[f64]) -> Vec<f64> {
        let mut x = xp.to_vec();
        x.push(self.v_star - xp.iter().sum::<f64>());
        x
    }

    /// Unnormalized log-density; `−∞` off the support.
    pub fn log_density(&self, xp: &[f64]) -> f64 {
        if !self.constraints.iter().all(|c| c.satisfied(xp)) {
            return f64::NEG_INFINITY;
        }
        self.model.logpdf(&self.lift(xp))
    }

    /// Gradient `g_i − g_d` of the lifted log-density.
    pub fn grad(&self, xp: &[f64], out: &mut [f64]) {
        let x = self.lift(xp);
        let mut g = vec![0.0; x.len()];
        self.model.grad_logpdf_into(&x, &mut g);
        let gd = g[x.len() - 1];
        for (o, gi) in out.iter_mut().zip(&g) {
            *o = gi - gd;
        }
    }
}

/// Fraction `t ∈ [0, 1]` of a drift `x + t·ε·p` at which the hyperplane of `c` is reached.
/// Only motion towards the infeasible side counts.
pub fn hit_time(x: &[f64], p: &[f64], eps: f64, c: &LinearConstraint) -> Option<f64> {
    let hp = dot(&c.h, p);
    if eps == 0.0 || hp >= 0.0 {
        return None;
    }
    let t = ((c.v - dot(&c.h, x)) / (eps * hp)).max(0.0);
    (t <= 1.0).then_some(t)
}

/// Mirrors position and momentum across the hyperplane of `c`.
pub fn reflect(x_star: &[f64], p: &[f64], c: &LinearConstraint) -> (Vec<f64>, Vec<f64>) {
    let hh = norm_sq(&c.h);
    let kx = 2.0 * (dot(&c.h, x_star) - c.v) / hh;
    let kp = 2.0 * dot(&c.h, p) / hh;
    let xr = x_star.iter().zip(&c.h).map(|(x, h)| x - kx * h).collect();
    let pr = p.iter().zip(&c.h).map(|(q, h)| q - kp * h).collect();
    (xr, pr)
}

/// Rewrites constraints on `x` as constraints on `y` where `x = mu + L·y`.
pub fn standardize_constraints(
    constraints: &[LinearConstraint],
    l: &DMatrix<f64>,
    mu: &[f64],
) -> Result<Vec<LinearConstraint>> {
    let d = mu.len();
    if l.nrows() != d || l.ncols() != d {
        return Err(invalid("factor and mean dimensions differ"));
    }
    if (0..d).any(|i| l[(i, i)] == 0.0 || !l[(i, i)].is_finite()) {
        return Err(Error::Numerical("standardizing factor is singular".into()));
    }
    constraints
        .iter()
        .map(|c| {
            let h: Vec<f64> = (0..d).map(|j| (0..d).map(|i| l[(i, j)] * c.h[i]).sum()).collect();
            LinearConstraint::new(h, c.v - dot(&c.h, mu))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_models::presets;
    use crate::Execution;
    use proptest::prelude::*;

    fn ladder_presample() -> SampleMatrix {
        let rows: Vec<Vec<f64>> = (1..=1000).map(|i| vec![i as f64 / 2.0, i as f64 / 2.0]).collect();
        SampleMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn es_event_from_ladder() {
        let e = estimate_event(
            &CrisisEventSpec::es(0.99).unwrap(),
            &ladder_presample(),
            SupportClass::Pnl,
        )
        .unwrap();
        assert_eq!(
            e.constraints,
            vec![LinearConstraint {
                h: vec![1.0, 1.0],
                v: 990.0
            }]
        );
        assert!(e.contains(&[500.0, 500.0]));
        assert!(!e.contains(&[400.0, 500.0]));
    }

    #[test]
    fn rvar_membership() {
        let spec = CrisisEventSpec::rvar(0.5, 0.9).unwrap();
        let e =
            ConcreteCrisisEvent::from_thresholds(spec, 2, vec![10.0, 20.0], None, SupportClass::PureLosses).unwrap();
        assert_eq!(e.constraints.len(), 4);
        assert!(e.contains(&[7.0, 8.0]));
        assert!(!e.contains(&[-1.0, 16.0]));
        assert!(!e.contains(&[10.0, 11.0]));
    }

    #[test]
    fn m1_rvar_thresholds_ordered() {
        let x = presets::m1().sample(100_000, 1, Execution::default());
        let e = estimate_event(
            &CrisisEventSpec::rvar(0.975, 0.99).unwrap(),
            &x,
            SupportClass::PureLosses,
        )
        .unwrap();
        assert!(e.thresholds[0] < e.thresholds[1]);
        assert_eq!(e.constraints.len(), 5);
    }

    #[test]
    fn var_band_event() {
        let spec = CrisisEventSpec::var(0.99, 0.001).unwrap();
        let x = presets::m1().sample(100_000, 2, Execution::default());
        let e = estimate_event(&spec, &x, SupportClass::PureLosses).unwrap();
        let sums = x.row_sums();
        let (lo, hi) = e.band.unwrap();
        assert_eq!(lo, empirical_quantile(&sums, 0.989).unwrap());
        assert_eq!(hi, empirical_quantile(&sums, 0.991).unwrap());
        assert!(lo <= e.sum_equality.unwrap() && e.sum_equality.unwrap() <= hi);
        let inside = x
            .rows()
            .filter(|r| e.sampling_constraints().unwrap().iter().all(|c| c.satisfied(r)))
            .count() as f64
            / 1e5;
        assert!((inside - 0.002).abs() < 2.0 / (1e5f64).sqrt());
    }

    #[test]
    fn var_band_requires_positive_delta_and_valid_levels() {
        assert!(CrisisEventSpec::var(0.999, 0.01).is_err());
        let spec = CrisisEventSpec::var(0.99, 0.0).unwrap();
        let e = estimate_event(&spec, &ladder_presample(), SupportClass::Pnl).unwrap();
        assert!(e.sampling_constraints().is_err());
    }

    #[test]
    fn var_equality_tolerance() {
        let spec = CrisisEventSpec::var(0.99, 0.0).unwrap();
        let e = ConcreteCrisisEvent::from_thresholds(spec, 2, vec![10.0], None, SupportClass::PureLosses).unwrap();
        assert!(e.contains(&[4.0, 6.0 + 1e-9]));
        assert!(!e.contains(&[4.0, 6.0 + 1e-7]));
    }

    #[test]
    fn small_presample_rejected() {
        let x = SampleMatrix::zeros(99, 2);
        assert!(estimate_event(&CrisisEventSpec::es(0.9).unwrap(), &x, SupportClass::Pnl).is_err());
    }

    #[test]
    fn reduced_var_target() {
        let t = reduce_var_event(&presets::m1(), 10.0).unwrap();
        assert_eq!(t.lift(&[4.0, 5.0]), vec![4.0, 5.0, 1.0]);
        assert!(t.log_density(&[4.0, 5.0]).is_finite());
        assert_eq!(t.log_density(&[6.0, 5.0]), f64::NEG_INFINITY);
        assert!(matches!(
            reduce_var_event(&presets::m2(), 1.0),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn reduced_gradient_matches_finite_differences() {
        let t = reduce_var_event(&presets::m1(), 10.0).unwrap();
        let x = [3.0, 2.5];
        let mut g = [0.0; 2];
        t.grad(&x, &mut g);
        for j in 0..2 {
            let h = 1e-6;
            let mut a = x;
            let mut b = x;
            a[j] += h;
            b[j] -= h;
            let fd = (t.log_density(&a) - t.log_density(&b)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * g[j].abs().max(1.0));
        }
    }

    #[test]
    fn hit_times() {
        let c = LinearConstraint::new(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(hit_time(&[1.0, 1.0], &[-2.0, 0.0], 1.0, &c), Some(0.5));
        assert_eq!(hit_time(&[1.0, 1.0], &[2.0, 0.0], 1.0, &c), None);
        assert_eq!(hit_time(&[1.0, 1.0], &[-2.0, 0.0], 0.0, &c), None);
        assert_eq!(hit_time(&[1.0, 1.0], &[0.0, 5.0], 1.0, &c), None);
        assert_eq!(hit_time(&[1.0, 1.0], &[-0.5, 0.0], 1.0, &c), None);
    }

    #[test]
    fn reflections() {
        let c = LinearConstraint::new(vec![1.0, 0.0], 0.0).unwrap();
        let (xr, pr) = reflect(&[-0.4, 1.0], &[-2.0, 3.0], &c);
        assert_eq!(xr, vec![0.4, 1.0]);
        assert_eq!(pr, vec![2.0, 3.0]);
        let (xx, pp) = reflect(&xr, &pr, &c);
        assert_eq!((xx, pp), (vec![-0.4, 1.0], vec![-2.0, 3.0]));
    }

    #[test]
    fn standardize_identity_and_singular() {
        let c = vec![LinearConstraint::sum(2, 1.0, 3.0)];
        let same = standardize_constraints(&c, &DMatrix::identity(2, 2), &[0.0, 0.0]).unwrap();
        assert_eq!(same, c);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(standardize_constraints(&c, &sing, &[0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn reflect_is_an_involution_preserving_energy(
            h in prop::collection::vec(-3f64..3.0, 3),
            v in -2f64..2.0,
            x in prop::collection::vec(-5f64..5.0, 3),
            p in prop::collection::vec(-5f64..5.0, 3),
        ) {
            prop_assume!(norm_sq(&h) > 1e-3);
            let c = LinearConstraint::new(h, v).unwrap();
            let (xr, pr) = reflect(&x, &p, &c);
            prop_assert!((norm_sq(&pr) - norm_sq(&p)).abs() < 1e-10 * (1.0 + norm_sq(&p)));
            prop_assert!((c.slack(&xr) + c.slack(&x)).abs() < 1e-9 * (1.0 + c.slack(&x).abs()));
            let (xx, pp) = reflect(&xr, &pr, &c);
            for i in 0..3 {
                prop_assert!((xx[i] - x[i]).abs() < 1e-9 && (pp[i] - p[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn standardization_preserves_membership(
            lvals in prop::collection::vec(-1f64..1.0, 6),
            diag in prop::collection::vec(0.2f64..3.0, 3),
            mu in prop::collection::vec(-2f64..2.0, 3),
            y in prop::collection::vec(-3f64..3.0, 3),
        ) {
            let mut l = DMatrix::zeros(3, 3);
            let mut k = 0;
            for i in 0..3 {
                l[(i, i)] = diag[i];
                for j in 0..i {
                    l[(i, j)] = lvals[k];
                    k += 1;
                }
            }
            let spec = CrisisEventSpec::rvar(0.2, 0.8).unwrap();
            let e = ConcreteCrisisEvent::from_thresholds(spec, 3, vec![0.5, 4.0], None, SupportClass::PureLosses)
                .unwrap();
            let sc = standardize_constraints(&e.constraints, &l, &mu).unwrap();
            let x: Vec<f64> = (0..3).map(|i| mu[i] + (0..3).map(|j| l[(i, j)] * y[j]).sum::<f64>()).collect();
            for (a, b) in e.constraints.iter().zip(&sc) {
                prop_assert!((a.slack(&x) - b.slack(&y)).abs() < 1e-9);
            }
        }
    }
}
