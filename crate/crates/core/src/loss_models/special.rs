//! Standard normal and Student t distribution functions.
//!
//! Lower and upper tails are evaluated separately so that probabilities near
//! 0 and 1 keep full relative precision.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use statrs::function::beta::{beta_reg, inv_beta_reg};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_logpdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn norm_pdf(z: f64) -> f64 {
    norm_logpdf(z).exp()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    // Rational approximation, then one Newton step on the tail that carries the precision.
    if p < 0.5 {
        let z = -SQRT_2 * erfc_inv(2.0 * p);
        z - (norm_cdf(z) - p) / norm_pdf(z)
    } else {
        let q = 1.0 - p;
        let z = SQRT_2 * erfc_inv(2.0 * q);
        z + (norm_sf(z) - q) / norm_pdf(z)
    }
}

/// Normalizing constant `ln Γ((ν+1)/2) − ln Γ(ν/2) − ½ ln(νπ)` of the standard t density.
pub fn t_log_norm_const(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

pub fn t_logpdf(t: f64, nu: f64) -> f64 {
    t_log_norm_const(nu) - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()
}

pub fn t_pdf(t: f64, nu: f64) -> f64 {
    t_logpdf(t, nu).exp()
}

/// Upper tail `P(T > t)` of the standard t distribution.
pub fn t_sf(t: f64, nu: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let t2 = t * t;
    let half_tail = if t2 < nu {
        // Central region: tail = ½ − ½·I_{t²/(ν+t²)}(½, ν/2).
        0.5 - 0.5 * beta_reg(0.5, 0.5 * nu, t2 / (nu + t2))
    } else {
        0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + t2))
    };
    if t >= 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

pub fn t_cdf(t: f64, nu: f64) -> f64 {
    t_sf(-t, nu)
}

/// Quantile of the standard t distribution.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    if p < 0.5 {
        -t_upper_quantile(p, nu)
    } else {
        t_upper_quantile(1.0 - p, nu)
    }
}

/// Solves `t_sf(t) = q` for `t > 0`, `q ∈ (0, ½)`.
fn t_upper_quantile(q: f64, nu: f64) -> f64 {
    let x = inv_beta_reg(0.5 * nu, 0.5, 2.0 * q);
    let mut t = if x > 0.0 && x < 1.0 {
        (nu * (1.0 - x) / x).sqrt()
    } else {
        -norm_quantile(q)
    };
    if !t.is_finite() || t <= 0.0 {
        t = 1.0;
    }
    // Bracket then polish with Newton steps on log sf, bisecting on escape.
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let ln_q = q.ln();
    for _ in 0..200 {
        let s = t_sf(t, nu);
        if s > q {
            lo = t;
        } else {
            hi = t;
        }
        let g = s.ln() - ln_q;
        let step = g * s / t_pdf(t, nu);
        let mut next = t + step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * t.max(1.0)
            };
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1e-300) {
            return next;
        }
        t = next;
    }
    t
}

/// Finds `x` in `[lo, hi]` with `f(x) = target` for nondecreasing `f`, by bisection.
#[cfg(test)]
pub(crate) fn bisect_monotone<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
