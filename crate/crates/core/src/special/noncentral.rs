//! Non-central t distribution.
//!
//! Tail areas use the Poisson-weighted incomplete beta series, summed outward
//! from the Poisson mode in both directions with the incomplete beta values
//! advanced by recurrence. Lower and upper tails are accumulated as two
//! separate positive series, so the upper tail is never formed as `1 - cdf`.
//!
//! The density is handled through its ratio to the central density,
//!
//! ```text
//! ψ_{ν,δ}(x) / ψ_ν(x) = exp(-(δ² - μ²)/2) · H_ν(μ) / (2^{(ν-1)/2} Γ((ν+1)/2)),
//! H_ν(μ) = ∫_0^∞ y^ν exp(-(y - μ)²/2) dy,   μ = δx / sqrt(ν + x²),
//! ```
//!
//! with `ln H_ν(μ)` evaluated by Gauss–Legendre quadrature in `s = ln y`, where
//! the integrand is unimodal and its effective support is located first.

use libm::{erfc, lgamma};

use super::beta::beta_reg_pair;
use super::central;
use crate::quadrature::{gl16, integrate_adaptive};

const WEIGHT_CUTOFF: f64 = 1e-20;
const MAX_TERMS: usize = 50_000_000;

#[inline]
fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `(P(T <= t), P(T > t))` for `t >= 0`.
fn tails_nonneg(t: f64, nu: f64, delta: f64) -> (f64, f64) {
    debug_assert!(t >= 0.0);
    if t == f64::INFINITY {
        return (1.0, 0.0);
    }
    if t == 0.0 {
        return (norm_cdf(-delta), norm_cdf(delta));
    }
    let (x, y) = central::beta_args(t, nu);
    let b = 0.5 * nu;
    let lam = 0.5 * delta * delta;
    if lam == 0.0 {
        let (i, c) = beta_reg_pair(0.5, b, x, y);
        return (0.5 + 0.5 * i, 0.5 * c);
    }

    let ln_lam = lam.ln();
    let ln_x = x.ln();
    let ln_y = y.ln();
    let lg_b = lgamma(b);
    let k = lam.floor();
    let sign = delta.signum();

    let p_mode = (-lam + k * ln_lam - lgamma(k + 1.0)).exp();
    let q_mode = sign * (-lam + (k + 0.5) * ln_lam - lgamma(k + 1.5)).exp();
    // g(a) = x^a y^b / (a B(a, b)) so that I_x(a+1, b) = I_x(a, b) - g(a).
    let g = |a: f64| (lgamma(a + b) - lgamma(a + 1.0) - lg_b + a * ln_x + b * ln_y).exp();

    let ap_mode = k + 0.5;
    let aq_mode = k + 1.0;
    let (ip_mode, cp_mode) = beta_reg_pair(ap_mode, b, x, y);
    let (iq_mode, cq_mode) = beta_reg_pair(aq_mode, b, x, y);
    let gp_mode = g(ap_mode);
    let gq_mode = g(aq_mode);

    let mut lower = p_mode * ip_mode + q_mode * iq_mode;
    let mut upper = p_mode * cp_mode + q_mode * cq_mode;

    // Forward from the mode.
    {
        let (mut p, mut q) = (p_mode, q_mode);
        let (mut ip, mut cp, mut gp, mut ap) = (ip_mode, cp_mode, gp_mode, ap_mode);
        let (mut iq, mut cq, mut gq, mut aq) = (iq_mode, cq_mode, gq_mode, aq_mode);
        let mut j = k;
        for _ in 0..MAX_TERMS {
            ip -= gp;
            cp += gp;
            gp *= x * (ap + b) / (ap + 1.0);
            ap += 1.0;
            iq -= gq;
            cq += gq;
            gq *= x * (aq + b) / (aq + 1.0);
            aq += 1.0;
            p *= lam / (j + 1.0);
            q *= lam / (j + 1.5);
            j += 1.0;
            lower += p * ip.max(0.0) + q * iq.max(0.0);
            upper += p * cp + q * cq;
            if p + q.abs() < WEIGHT_CUTOFF {
                break;
            }
        }
    }

    // Backward from the mode.
    {
        let (mut p, mut q) = (p_mode, q_mode);
        let (mut ip, mut cp, mut gp, mut ap) = (ip_mode, cp_mode, gp_mode, ap_mode);
        let (mut iq, mut cq, mut gq, mut aq) = (iq_mode, cq_mode, gq_mode, aq_mode);
        let mut j = k;
        while j >= 1.0 {
            // g(a - 1) = g(a) · a / (x (a + b - 1))
            gp *= ap / (x * (ap + b - 1.0));
            ap -= 1.0;
            ip += gp;
            cp -= gp;
            gq *= aq / (x * (aq + b - 1.0));
            aq -= 1.0;
            iq += gq;
            cq -= gq;
            p *= j / lam;
            q *= (j + 0.5) / lam;
            j -= 1.0;
            lower += p * ip + q * iq;
            upper += p * cp.max(0.0) + q * cq.max(0.0);
            if p + q.abs() < WEIGHT_CUTOFF {
                break;
            }
        }
    }

    let lower = (norm_cdf(-delta) + 0.5 * lower).clamp(0.0, 1.0);
    let mut upper = (0.5 * upper).clamp(0.0, 1.0);
    // With δ < 0 the upper series alternates in sign and loses all relative
    // accuracy once the tail is small.
    if delta < 0.0 && upper < SMALL_TAIL {
        upper = upper_tail_integral(t, nu, -delta);
    }
    (lower, upper)
}

const SMALL_TAIL: f64 = 1e-6;

/// `P(Z - a > t W)` for `a > 0`, `W = sqrt(V / ν)`, as `E[Φ(-(tW + a))]`
/// integrated over `s = ln W`.
fn upper_tail_integral(t: f64, nu: f64, a: f64) -> f64 {
    let c = std::f64::consts::LN_2 + 0.5 * nu * (0.5 * nu).ln() - lgamma(0.5 * nu);
    let f = |s: f64| {
        let w = s.exp();
        let tail = 0.5 * erfc((t * w + a) / std::f64::consts::SQRT_2);
        if tail == 0.0 {
            return 0.0;
        }
        (tail.ln() + c + nu * s - 0.5 * nu * w * w).exp()
    };
    let lo = -60.0 / nu - 10.0;
    let hi = 0.5 * (3.0 + 240.0 / nu).ln() + 1.0;
    integrate_adaptive(f, lo, hi, 0.0, 1e-13, 400)
}

/// `P(T <= x)` for `T ~ t(ν, δ)`.
pub(crate) fn cdf(x: f64, nu: f64, delta: f64) -> f64 {
    if x >= 0.0 {
        tails_nonneg(x, nu, delta).0
    } else {
        // P(T <= x) = P(-T >= -x) and -T ~ t(ν, -δ).
        tails_nonneg(-x, nu, -delta).1
    }
}

/// `P(T > x)` for `T ~ t(ν, δ)`.
pub(crate) fn sf(x: f64, nu: f64, delta: f64) -> f64 {
    if x >= 0.0 {
        tails_nonneg(x, nu, delta).1
    } else {
        tails_nonneg(-x, nu, -delta).0
    }
}

/// Quantities that depend only on `(x, ν)`; lets the density ratio be
/// re-evaluated cheaply for many `δ` at the same point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RatioPoint {
    nu: f64,
    /// `x / sqrt(ν + x²)`
    unit_mu: f64,
    /// `ν / (ν + x²)`
    shrink: f64,
    /// `((ν - 1)/2) ln 2 + ln Γ((ν + 1)/2)`, i.e. `ln H_ν(0)`.
    ln_h0: f64,
}

impl RatioPoint {
    pub(crate) fn new(x: f64, nu: f64) -> Self {
        let r = x / nu.sqrt();
        let (unit_mu, shrink) = if r.abs() > 1e150 {
            (r.signum(), 0.0)
        } else {
            let den = 1.0 + r * r;
            (r / den.sqrt(), 1.0 / den)
        };
        Self {
            nu,
            unit_mu,
            shrink,
            ln_h0: ln_h0(nu),
        }
    }

    /// `ln(ψ_{ν,δ}(x) / ψ_ν(x))`.
    #[inline]
    pub(crate) fn log_ratio(&self, delta: f64) -> f64 {
        if delta == 0.0 {
            return 0.0;
        }
        let mu = delta * self.unit_mu;
        -0.5 * delta * delta * self.shrink + ln_hermite_integral(mu, self.nu) - self.ln_h0
    }
}

#[inline]
fn ln_h0(nu: f64) -> f64 {
    0.5 * (nu - 1.0) * std::f64::consts::LN_2 + lgamma(0.5 * (nu + 1.0))
}

pub(crate) fn log_ratio(x: f64, nu: f64, delta: f64) -> f64 {
    RatioPoint::new(x, nu).log_ratio(delta)
}

pub(crate) fn pdf_log(x: f64, nu: f64, delta: f64) -> f64 {
    central::pdf_log(x, nu) + log_ratio(x, nu, delta)
}

/// Panel boundaries on each side of the peak sit where the log integrand has
/// dropped by these amounts. The first panel carries most of the mass, the
/// last boundary truncates the tail at `e^-46` relative to the peak.
const LEVELS: [f64; 4] = [4.5, 16.0, 30.0, 46.0];

/// `ln ∫_0^∞ y^ν exp(-(y - μ)²/2) dy`.
pub(crate) fn ln_hermite_integral(mu: f64, nu: f64) -> f64 {
    let a = nu + 1.0;
    let disc = (mu * mu + 4.0 * a).sqrt();
    // Peak of the integrand in s = ln y solves w² - μw - a = 0.
    let (w, w_minus_mu) = if mu >= 0.0 {
        let w = 0.5 * (mu + disc);
        (w, 2.0 * a / (disc + mu))
    } else {
        let w = 2.0 * a / (disc - mu);
        (w, 0.5 * (disc - mu))
    };
    let s0 = w.ln();
    let k0 = a * s0 - 0.5 * w_minus_mu * w_minus_mu;
    let sigma = 1.0 / (w * w + a).sqrt();

    let k = |s: f64| {
        let e = s.exp();
        let d = e - mu;
        a * s - 0.5 * d * d
    };
    let dk = |s: f64| {
        let e = s.exp();
        a - (e - mu) * e
    };

    let rule = gl16();
    let mut sum = 0.0;
    for dir in [-1.0, 1.0] {
        let mut inner = s0;
        let mut inner_drop = 0.0f64;
        for (i, &drop) in LEVELS.iter().enumerate() {
            let guess = ((2.0 * drop).sqrt() - (2.0 * inner_drop).sqrt()) * sigma;
            let last = i + 1 == LEVELS.len();
            let outer = level_point(&k, &dk, inner, dir * guess, k0 - drop, last);
            let half = 0.5 * (outer - inner);
            let mid = 0.5 * (outer + inner);
            let mut acc = 0.0;
            for (&node, &weight) in rule.nodes().iter().zip(rule.weights()) {
                acc += weight * (k(mid + half * node) - k0).exp();
            }
            sum += acc * half.abs();
            inner = outer;
            inner_drop = drop;
        }
    }
    k0 + sum.ln()
}

/// Moves outward from `start` (where `k > target`) to the point where `k`
/// has fallen to `target`; `step` is a first guess carrying the direction.
/// Boundaries only need to be close, except the outermost one, which must lie
/// at or beyond the level (`must_pass`).
fn level_point<K, D>(k: &K, dk: &D, start: f64, step: f64, target: f64, must_pass: bool) -> f64
where
    K: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let dir = step.signum();
    let mut h = step.abs().max(1e-12);
    let mut inner = start;
    let mut outer = start + dir * h;
    let mut guard = 0;
    while k(outer) > target {
        inner = outer;
        h *= 2.0;
        outer = start + dir * h;
        guard += 1;
        if guard > 200 {
            return outer;
        }
    }
    let mut s = outer;
    for _ in 0..6 {
        let f = k(s) - target;
        if f.abs() < 0.25 {
            break;
        }
        if f > 0.0 {
            inner = s;
        } else {
            outer = s;
        }
        let (lo, hi) = if inner < outer { (inner, outer) } else { (outer, inner) };
        let mut next = s - f / dk(s);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (inner + outer);
        }
        s = next;
    }
    if must_pass && k(s) > target {
        outer
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_integral_at_zero_matches_gamma() {
        for &nu in &[0.5, 2.0, 10.0, 122.0, 1000.0] {
            let got = ln_hermite_integral(0.0, nu);
            let exact = ln_h0(nu);
            assert!((got - exact).abs() < 1e-13 * exact.abs().max(1.0), "{nu}: {got} {exact}");
        }
    }

    #[test]
    fn hermite_integral_integer_nu_closed_form() {
        // nu = 1: ∫ y e^{-(y-μ)²/2} dy = e^{-μ²/2} + μ sqrt(2π) Φ(μ)
        for &mu in &[-8.0f64, -2.0, -0.3, 0.7, 3.0, 15.0] {
            let exact = (-0.5 * mu * mu).exp()
                + mu * (2.0 * std::f64::consts::PI).sqrt() * norm_cdf(mu);
            let got = ln_hermite_integral(mu, 1.0).exp();
            assert!(((got - exact) / exact).abs() < 1e-11, "{mu}: {got} {exact}");
        }
    }

    #[test]
    fn more_panels_do_not_change_result() {
        // Reference: brute-force composite rule across a wide window in y.
        for &(mu, nu) in &[(-9.0, 122.0), (9.0, 122.0), (0.5, 2.0), (-3.0, 10.0), (20.0, 5.0)] {
            let got = ln_hermite_integral(mu, nu);
            let rule = gl16();
            let peak = {
                let w: f64 = 0.5 * (mu + (mu * mu + 4.0 * (nu + 1.0)).sqrt());
                (nu + 1.0) * w.ln() - 0.5 * (w - mu) * (w - mu)
            };
            let n = 4000;
            let (lo, hi) = (-60.0f64, 6.0f64);
            let width = (hi - lo) / n as f64;
            let mut sum = 0.0;
            for i in 0..n {
                let a = lo + width * i as f64;
                sum += rule.integrate(a, a + width, |s| {
                    let e = s.exp();
                    ((nu + 1.0) * s - 0.5 * (e - mu) * (e - mu) - peak).exp()
                });
            }
            let reference = peak + sum.ln();
            assert!((got - reference).abs() < 1e-12 * reference.abs().max(1.0), "{mu} {nu}: {got} {reference}");
        }
    }

    #[test]
    fn central_reduction() {
        let d = 0.0;
        assert_eq!(log_ratio(1.3, 10.0, d), 0.0);
        let (lo, up) = tails_nonneg(1.3, 10.0, d);
        assert!((lo - central::cdf(1.3, 10.0)).abs() < 1e-15);
        assert!((up - central::sf(1.3, 10.0)).abs() < 1e-15);
    }

    #[test]
    fn tails_sum_to_one() {
        for &(t, nu, d) in &[(0.5, 3.0, 2.0), (2.0, 122.0, 3.0), (15.0, 10.0, 6.0), (1.0, 2.0, -4.0)] {
            let (lo, up) = tails_nonneg(t, nu, d);
            assert!((lo + up - 1.0).abs() < 1e-13, "{t} {nu} {d}: {lo} {up}");
        }
    }

    #[test]
    fn small_tail_positive_and_ordered() {
        let a = sf(20.0, 122.0, 3.0);
        let b = sf(25.0, 122.0, 3.0);
        assert!(a > 0.0 && b > 0.0 && b < a && a < 1e-25);
    }
}
