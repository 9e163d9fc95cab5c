//! Central Student t distribution: tail areas, log density and quantiles.

use libm::lgamma;

use super::beta::beta_reg_pair;

/// Returns `(t² / (ν + t²), ν / (ν + t²))`, each computed without cancellation.
#[inline]
pub(crate) fn beta_args(t: f64, nu: f64) -> (f64, f64) {
    let r = t / nu.sqrt();
    let r2 = r * r;
    if r2.is_infinite() {
        let inv = 1.0 / r;
        return (1.0, inv * inv);
    }
    let den = 1.0 + r2;
    (r2 / den, 1.0 / den)
}

/// Upper tail `P(t_ν > x)`.
pub(crate) fn sf(x: f64, nu: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    let (bx, by) = beta_args(x, nu);
    let (lower, upper) = beta_reg_pair(0.5, 0.5 * nu, bx, by);
    if x >= 0.0 {
        0.5 * upper
    } else {
        0.5 + 0.5 * lower
    }
}

#[inline]
pub(crate) fn cdf(x: f64, nu: f64) -> f64 {
    sf(-x, nu)
}

/// Log normalising constant `ln Γ((ν+1)/2) − ln Γ(ν/2) − ½ ln(νπ)`.
#[inline]
pub(crate) fn log_norm(nu: f64) -> f64 {
    lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
}

#[inline]
pub(crate) fn pdf_log_with(x: f64, nu: f64, log_norm: f64) -> f64 {
    let r = x.abs() / nu.sqrt();
    let l1p = if r > 1e150 {
        2.0 * r.ln()
    } else {
        (r * r).ln_1p()
    };
    log_norm - 0.5 * (nu + 1.0) * l1p
}

pub(crate) fn pdf_log(x: f64, nu: f64) -> f64 {
    pdf_log_with(x, nu, log_norm(nu))
}

/// Inverse upper tail: the `x` with `P(t_ν > x) = p`, for `0 < p < 1`.
pub(crate) fn isf(p: f64, nu: f64) -> f64 {
    if p == 0.5 {
        0.0
    } else if p > 0.5 {
        // 1 - p is exact for p in (0.5, 1).
        -isf_upper(1.0 - p, nu)
    } else {
        isf_upper(p, nu)
    }
}

/// Solves `ln sf(x) = ln q` for `x >= 0`, `0 < q < 0.5`, by Newton's method in
/// log space safeguarded by a bracket that falls back to bisection.
fn isf_upper(q: f64, nu: f64) -> f64 {
    let target = q.ln();
    let ln_c = log_norm(nu);
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut x = initial_guess(q, nu).max(0.0);
    if !x.is_finite() {
        x = 1.0;
    }
    for _ in 0..200 {
        let s = sf(x, nu);
        if s <= 0.0 {
            hi = x;
            x = 0.5 * (lo + hi);
            continue;
        }
        let f = s.ln() - target;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx ln sf = -pdf / sf
        let ratio = (pdf_log_with(x, nu, ln_c) - s.ln()).exp();
        let mut next = x + f / ratio;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * x.max(1.0)
            };
        }
        let step = (next - x).abs();
        x = next;
        let collapsed = hi.is_finite() && hi - lo <= f64::EPSILON * hi;
        if step <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) || collapsed {
            break;
        }
    }
    x
}

/// Normal quantile (Abramowitz & Stegun 26.2.23) with a Cornish–Fisher
/// correction toward the t distribution. Only a starting point.
fn initial_guess(q: f64, nu: f64) -> f64 {
    let t = (-2.0 * q.ln()).sqrt();
    let z = t - (2.515_517 + 0.802_853 * t + 0.010_328 * t * t)
        / (1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t);
    let z3 = z * z * z;
    let z5 = z3 * z * z;
    let guess = z + (z3 + z) / (4.0 * nu) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * nu * nu);
    if nu < 3.0 {
        // The expansion diverges for very heavy tails; use the power-law tail.
        guess.max((q * nu.sqrt()).powf(-1.0 / nu).min(1e300))
    } else {
        guess
    }
}
