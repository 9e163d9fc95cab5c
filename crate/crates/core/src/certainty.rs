//! Activation and inactivation certainty, the reliability frontier and AUC.
//!
//! A voxel is declared active when its p-value is at most `τ`. With `π(τ)` the
//! power of that test,
//!
//! ```text
//! ρ⁺(τ) = λπ(τ) / ((1 - λ)τ + λπ(τ))
//! ρ⁻(τ) = (1 - λ)(1 - τ) / ((1 - λ)(1 - τ) + λ(1 - π(τ)))
//! F(τ)  = (1 - λ)(1 - τ) + λπ(τ)
//! ```
//!
//! `F` is the probability of a correct decision. `π'(τ)` is the density ratio
//! `r`, decreasing in `τ` for `δ > 0`, so `F` is concave and its maximiser
//! solves `λ r = 1 - λ`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::exec::{map_range, Execution};
use crate::mle::VoxelFit;
use crate::model::{power_raw, MixtureParams};
use crate::quadrature::gl64;
use crate::special::{central, noncentral, Dof, Noncentrality};

/// The stationarity root is searched for with `τ` in `[TAU_EDGE, 1 - TAU_EDGE]`;
/// outside that range the frontier is maximised by golden-section search.
pub const TAU_EDGE: f64 = 1e-10;

fn open_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        domain(format!("threshold must lie in (0, 1), got {tau}"))
    }
}

fn closed_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        domain(format!("threshold must lie in [0, 1], got {tau}"))
    }
}

fn rho_plus_raw(tau: f64, lambda: f64, delta: f64, nu: f64) -> f64 {
    let pw = power_raw(tau, delta, nu);
    let num = lambda * pw;
    let den = (1.0 - lambda) * tau + num;
    if den > 0.0 {
        num / den
    } else {
        lambda
    }
}

fn rho_minus_raw(tau: f64, lambda: f64, delta: f64, nu: f64) -> f64 {
    // 1 - π(τ) is the non-central lower tail, summed directly.
    let miss = if tau <= 0.0 {
        1.0
    } else if tau >= 1.0 {
        0.0
    } else {
        noncentral::cdf(central::isf(tau, nu), nu, delta)
    };
    let num = (1.0 - lambda) * (1.0 - tau);
    let den = num + lambda * miss;
    if den > 0.0 {
        num / den
    } else {
        1.0 - lambda
    }
}

fn frontier_raw(tau: f64, lambda: f64, delta: f64, nu: f64) -> f64 {
    (1.0 - lambda) * (1.0 - tau) + lambda * power_raw(tau, delta, nu)
}

/// True-activation certainty `P(active | p <= τ)`.
pub fn rho_plus(tau: f64, params: MixtureParams, nu: Dof) -> Result<f64> {
    open_tau(tau)?;
    Ok(rho_plus_raw(tau, params.lambda(), params.delta(), nu.get()))
}

/// True-inactivation certainty `P(inactive | p > τ)`.
pub fn rho_minus(tau: f64, params: MixtureParams, nu: Dof) -> Result<f64> {
    open_tau(tau)?;
    Ok(rho_minus_raw(tau, params.lambda(), params.delta(), nu.get()))
}

/// Probability of a correct decision at threshold `τ`.
pub fn frontier(tau: f64, params: MixtureParams, nu: Dof) -> Result<f64> {
    closed_tau(tau)?;
    Ok(frontier_raw(tau, params.lambda(), params.delta(), nu.get()))
}

/// Limits of `(ρ⁺, ρ⁻)` as `τ` tends to 0 or 1.
fn rho_limits(tau: f64, lambda: f64, delta: f64, nu: f64) -> (f64, f64) {
    let x = if tau <= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    let r = noncentral::RatioPoint::new(x, nu).log_ratio(delta).exp();
    if tau <= 0.0 {
        let num = lambda * r;
        let den = 1.0 - lambda + num;
        (if den > 0.0 { num / den } else { lambda }, 1.0 - lambda)
    } else {
        let den = 1.0 - lambda + lambda * r;
        (lambda, if den > 0.0 { (1.0 - lambda) / den } else { 1.0 - lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalThreshold {
    pub tau: f64,
    pub frontier: f64,
    /// Found as a root of the stationarity condition.
    pub interior: bool,
    /// The frontier is flat, so every `τ` is optimal; `tau` is 0 by convention.
    pub degenerate: bool,
}

/// The `τ` in `[0, 1]` maximising the frontier.
pub fn optimal_threshold(params: MixtureParams, nu: Dof) -> OptimalThreshold {
    optimal_threshold_raw(params.lambda(), params.delta(), nu.get())
}

pub(crate) fn optimal_threshold_raw(lambda: f64, delta: f64, nu: f64) -> OptimalThreshold {
    let at = |tau: f64, interior: bool, degenerate: bool| OptimalThreshold {
        tau,
        frontier: frontier_raw(tau, lambda, delta, nu),
        interior,
        degenerate,
    };
    if lambda <= 0.0 {
        return at(0.0, false, false);
    }
    if lambda >= 1.0 {
        return at(1.0, false, false);
    }
    if delta <= 0.0 {
        // r is nonincreasing in x, F is convex or flat: a boundary wins.
        let (f0, f1) = (1.0 - lambda, lambda);
        let flat = delta == 0.0 && f0 == f1;
        return if f1 > f0 { at(1.0, false, false) } else { at(0.0, false, flat) };
    }

    let offset = lambda.ln() - (-lambda).ln_1p();
    // g(x) = ln(λ r(x) / (1 - λ)), increasing in the t-scale point x.
    let g = |x: f64| offset + noncentral::log_ratio(x, nu, delta);
    let x_hi = central::isf(TAU_EDGE, nu);
    let x_lo = -x_hi;
    let (g_lo, g_hi) = (g(x_lo), g(x_hi));
    if g_hi < 0.0 {
        return golden(lambda, delta, nu, 0.0, TAU_EDGE);
    }
    if g_lo > 0.0 {
        return golden(lambda, delta, nu, 1.0 - TAU_EDGE, 1.0);
    }
    let (mut lo, mut hi) = (x_lo, x_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = if g(hi).abs() < g(lo).abs() { hi } else { lo };
    at(central::sf(x, nu), true, false)
}

/// Golden-section maximisation of the frontier over `[a, b]`, compared
/// against both end points.
fn golden(lambda: f64, delta: f64, nu: f64, a: f64, b: f64) -> OptimalThreshold {
    let f = |t: f64| frontier_raw(t, lambda, delta, nu);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a1, mut b1) = (a, b);
    let mut c = b1 - inv_phi * (b1 - a1);
    let mut d = a1 + inv_phi * (b1 - a1);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b1 - a1 <= f64::EPSILON * b1.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc >= fd {
            b1 = d;
            d = c;
            fd = fc;
            c = b1 - inv_phi * (b1 - a1);
            fc = f(c);
        } else {
            a1 = c;
            c = d;
            fc = fd;
            d = a1 + inv_phi * (b1 - a1);
            fd = f(d);
        }
    }
    let mut best = (0.5 * (a1 + b1), f(0.5 * (a1 + b1)));
    for t in [a, b] {
        let v = f(t);
        if v >= best.1 {
            best = (t, v);
        }
    }
    OptimalThreshold {
        tau: best.0,
        frontier: best.1,
        interior: false,
        degenerate: false,
    }
}

/// Panel edges for the AUC rule. The power rises steeply at `τ = 0`, so the
/// panels shrink geometrically toward it.
const AUC_EDGES: [f64; 9] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1e-1, 1.0];

/// Composite 64-point Gauss–Legendre rule for `∫₀¹ π(τ) dτ` at fixed `ν`, with
/// the t-scale image of each node precomputed.
#[derive(Debug, Clone)]
pub struct AucRule {
    nu: f64,
    weights: Vec<f64>,
    points: Vec<f64>,
}

impl AucRule {
    pub fn new(nu: Dof) -> Self {
        let rule = gl64();
        let mut weights = Vec::new();
        let mut points = Vec::new();
        for w in AUC_EDGES.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            for (&node, &weight) in rule.nodes().iter().zip(rule.weights()) {
                weights.push(weight * half);
                points.push(central::isf(mid + half * node, nu.get()));
            }
        }
        Self {
            nu: nu.get(),
            weights,
            points,
        }
    }

    pub fn auc(&self, delta: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.points)
            .map(|(&w, &x)| w * noncentral::sf(x, self.nu, delta))
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }
}

/// Area under the ROC curve, `∫₀¹ π(τ) dτ`.
pub fn auc(delta: Noncentrality, nu: Dof) -> f64 {
    AucRule::new(nu).auc(delta.get())
}

/// Where per-voxel thresholds come from.
#[derive(Debug, Clone, Copy)]
pub enum TauSource<'a> {
    /// The frontier maximiser of each voxel.
    Frontier,
    /// One threshold per voxel, e.g. a global FDR cutoff repeated.
    External(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecordFlags {
    pub not_converged: bool,
    pub threshold_degenerate: bool,
    /// `τ` is 0 or 1; certainties are the limiting values.
    pub boundary_tau: bool,
    /// `τ` is NaN or outside `[0, 1]`; certainties are NaN.
    pub invalid_tau: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertaintyRecord {
    pub tau: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub frontier: f64,
    pub auc: f64,
    pub flags: RecordFlags,
}

/// Certainty record for one fitted voxel at threshold `tau`.
pub fn certainty_record(fit: &VoxelFit, nu: Dof, tau: f64) -> CertaintyRecord {
    record_with(fit, &AucRule::new(nu), tau)
}

fn record_with(fit: &VoxelFit, rule: &AucRule, tau: f64) -> CertaintyRecord {
    let (l, d, n) = (fit.lambda, fit.delta, rule.nu);
    let mut flags = RecordFlags {
        not_converged: !fit.converged,
        ..Default::default()
    };
    let auc = rule.auc(d);
    let (rho_plus, rho_minus, frontier) = if !(0.0..=1.0).contains(&tau) {
        flags.invalid_tau = true;
        (f64::NAN, f64::NAN, f64::NAN)
    } else if tau == 0.0 || tau == 1.0 {
        flags.boundary_tau = true;
        let (rp, rm) = rho_limits(tau, l, d, n);
        (rp, rm, frontier_raw(tau, l, d, n))
    } else {
        (
            rho_plus_raw(tau, l, d, n),
            rho_minus_raw(tau, l, d, n),
            frontier_raw(tau, l, d, n),
        )
    };
    CertaintyRecord {
        tau,
        rho_plus,
        rho_minus,
        frontier,
        auc,
        flags,
    }
}

/// Certainty records for every fitted voxel.
pub fn certainty_volume(
    fits: &[VoxelFit],
    nu: Dof,
    source: TauSource<'_>,
    exec: Execution,
) -> Result<Vec<CertaintyRecord>> {
    if let TauSource::External(taus) = source {
        if taus.len() != fits.len() {
            return Err(crate::Error::Shape(format!(
                "{} thresholds for {} voxels",
                taus.len(),
                fits.len()
            )));
        }
    }
    let rule = AucRule::new(nu);
    Ok(map_range(exec, fits.len(), |i| {
        let fit = &fits[i];
        match source {
            TauSource::External(taus) => record_with(fit, &rule, taus[i]),
            TauSource::Frontier => {
                let opt = optimal_threshold_raw(fit.lambda, fit.delta, nu.get());
                let mut rec = record_with(fit, &rule, opt.tau);
                rec.flags.threshold_degenerate = opt.degenerate;
                rec
            }
        }
    }))
}
