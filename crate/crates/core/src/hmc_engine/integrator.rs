//! Leapfrog integrators for `H(x, p) = U(x) + ½‖p‖²`.

use crate::crisis_events::{hit_time, LinearConstraint};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm_sq};

/// Runaway guard on the number of reflections within one drift.
pub const MAX_REFLECTIONS: usize = 10_000;

fn kick(p: &mut [f64], grad_u: &[f64], half_eps: f64) {
    for (pi, gi) in p.iter_mut().zip(grad_u) {
        *pi -= half_eps * gi;
    }
}

/// One leapfrog step in place. `grad_u` writes `∇U(x)`.
pub fn leapfrog<G>(x: &mut [f64], p: &mut [f64], eps: f64, mut grad_u: G) -> Result<()>
where
    G: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let mut g = vec![0.0; x.len()];
    grad_u(x, &mut g)?;
    kick(p, &g, 0.5 * eps);
    for (xi, pi) in x.iter_mut().zip(p.iter()) {
        *xi += eps * pi;
    }
    grad_u(x, &mut g)?;
    kick(p, &g, 0.5 * eps);
    Ok(())
}

/// Straight-line drift of duration `eps`, reflecting off the hyperplanes it reaches.
/// Returns the number of reflections.
pub(crate) fn reflective_drift(
    x: &mut [f64],
    p: &mut [f64],
    eps: f64,
    constraints: &[LinearConstraint],
) -> Result<usize> {
    let mut remaining = eps;
    let mut count = 0;
    loop {
        let mut hit: Option<(usize, f64)> = None;
        for (m, c) in constraints.iter().enumerate() {
            if let Some(t) = hit_time(x, p, remaining, c) {
                if hit.is_none_or(|(_, best)| t < best) {
                    hit = Some((m, t));
                }
            }
        }
        let Some((m, t)) = hit else {
            for (xi, pi) in x.iter_mut().zip(p.iter()) {
                *xi += remaining * pi;
            }
            return Ok(count);
        };
        count += 1;
        if count > MAX_REFLECTIONS {
            return Err(Error::Numerical(format!(
                "more than {MAX_REFLECTIONS} reflections in one leapfrog drift"
            )));
        }
        let c = &constraints[m];
        let step = t * remaining;
        for (xi, pi) in x.iter_mut().zip(p.iter()) {
            *xi += step * pi;
        }
        // Land exactly on the hyperplane, then mirror the normal momentum component.
        let hh = norm_sq(&c.h);
        let off = (dot(&c.h, x) - c.v) / hh;
        let kp = 2.0 * dot(&c.h, p) / hh;
        for ((xi, pi), hi) in x.iter_mut().zip(p.iter_mut()).zip(&c.h) {
            *xi -= off * hi;
            *pi -= kp * hi;
        }
        remaining *= 1.0 - t;
    }
}

/// One leapfrog step with reflection at `constraints`.
///
/// `g` holds `∇U(x)` on entry and is updated to `∇U(x')` on exit, so consecutive
/// steps reuse the gradient.
pub(crate) fn leapfrog_reflect_cached<G>(
    x: &mut [f64],
    p: &mut [f64],
    g: &mut [f64],
    eps: f64,
    grad_u: &mut G,
    constraints: &[LinearConstraint],
) -> Result<usize>
where
    G: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    kick(p, g, 0.5 * eps);
    let n = reflective_drift(x, p, eps, constraints)?;
    grad_u(x, g)?;
    kick(p, g, 0.5 * eps);
    Ok(n)
}

/// One leapfrog step with reflection; returns the number of reflections.
pub fn leapfrog_reflect<G>(
    x: &mut [f64],
    p: &mut [f64],
    eps: f64,
    mut grad_u: G,
    constraints: &[LinearConstraint],
) -> Result<usize>
where
    G: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let mut g = vec![0.0; x.len()];
    grad_u(x, &mut g)?;
    leapfrog_reflect_cached(x, p, &mut g, eps, &mut grad_u, constraints)
}
