//! Mixture model for replicated one-sided p-values.
//!
//! Under the null a p-value is standard uniform. Under activation the t
//! statistic is non-central, so with `x = Ψ⁻¹_ν(1 - p)` the p-value has CDF
//! `1 - Ψ_{ν,δ}(x)` and density `ψ_{ν,δ}(x) / ψ_ν(x)`. A voxel mixes the two
//! with activation probability λ.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::{central, noncentral, Dof, Noncentrality};

/// Observed p-values are clamped into `[P_FLOOR, 1 - P_FLOOR]` at ingest.
pub const P_FLOOR: f64 = 1e-12;

/// Activation probability λ and effect size δ of one voxel.
///
/// [`MixtureParams::new`] accepts the full kernel domain (`0 <= λ <= 1`, any
/// finite δ) so limiting cases can be evaluated; estimates produced by the
/// fitting engine are always [`estimable`](MixtureParams::is_estimable).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    lambda: f64,
    delta: f64,
}

impl MixtureParams {
    pub fn new(lambda: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return domain(format!("lambda must lie in [0, 1], got {lambda}"));
        }
        if !delta.is_finite() {
            return domain(format!("delta must be finite, got {delta}"));
        }
        Ok(Self { lambda, delta })
    }

    /// Parameters inside the estimation space `0 < λ < 1`, `δ > 1`.
    pub fn estimable(lambda: f64, delta: f64) -> Result<Self> {
        let p = Self::new(lambda, delta)?;
        if p.is_estimable() {
            Ok(p)
        } else {
            domain(format!(
                "estimation space requires 0 < lambda < 1 and delta > 1, got ({lambda}, {delta})"
            ))
        }
    }

    pub fn is_estimable(&self) -> bool {
        self.lambda > 0.0 && self.lambda < 1.0 && self.delta > 1.0
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn noncentrality(&self) -> Noncentrality {
        Noncentrality::new(self.delta).expect("validated at construction")
    }
}

/// Clamps a p-value into `[P_FLOOR, 1 - P_FLOOR]`, reporting whether it moved.
#[inline]
pub fn clamp_pvalue(p: f64) -> (f64, bool) {
    let c = p.clamp(P_FLOOR, 1.0 - P_FLOOR);
    (c, c != p)
}

/// The M p-values of one voxel with their per-replication degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector {
    values: Vec<f64>,
    dofs: Vec<Dof>,
    clamped: usize,
}

impl PValueVector {
    /// Validates lengths and `[0, 1]` range, then clamps each value.
    pub fn new(values: Vec<f64>, dofs: Vec<Dof>) -> Result<Self> {
        if values.len() != dofs.len() {
            return domain(format!(
                "{} p-values but {} degrees of freedom",
                values.len(),
                dofs.len()
            ));
        }
        let mut clamped = 0;
        let mut out = Vec::with_capacity(values.len());
        for &p in &values {
            if !(0.0..=1.0).contains(&p) {
                return domain(format!("p-value outside [0, 1]: {p}"));
            }
            let (c, moved) = clamp_pvalue(p);
            clamped += moved as usize;
            out.push(c);
        }
        Ok(Self {
            values: out,
            dofs,
            clamped,
        })
    }

    pub fn with_common_dof(values: Vec<f64>, nu: Dof) -> Result<Self> {
        let dofs = vec![nu; values.len()];
        Self::new(values, dofs)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of inputs that were moved by clamping.
    pub fn clamped(&self) -> usize {
        self.clamped
    }
}

fn check_unit_closed(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        domain(format!("{what} must lie in [0, 1], got {p}"))
    }
}

/// Power of the one-sided level-τ test: `1 - Ψ_{ν,δ}(Ψ⁻¹_ν(1 - τ))`.
pub fn power(tau: f64, delta: Noncentrality, nu: Dof) -> Result<f64> {
    check_unit_closed(tau, "threshold")?;
    Ok(power_raw(tau, delta.get(), nu.get()))
}

#[inline]
pub(crate) fn power_raw(tau: f64, delta: f64, nu: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if tau >= 1.0 {
        return 1.0;
    }
    let x = central::isf(tau, nu);
    noncentral::sf(x, nu, delta)
}

/// `P(P <= p) = (1 - λ) p + λ · power(p)`.
pub fn mixture_cdf(p: f64, params: MixtureParams, nu: Dof) -> Result<f64> {
    check_unit_closed(p, "p-value")?;
    let l = params.lambda;
    Ok(((1.0 - l) * p + l * power_raw(p, params.delta, nu.get())).clamp(0.0, 1.0))
}

/// Mixture density of the p-value, `(1 - λ) + λ ψ_{ν,δ}(x) / ψ_ν(x)`.
pub fn mixture_pdf(p: f64, params: MixtureParams, nu: Dof) -> Result<f64> {
    Ok(mixture_pdf_log(p, params, nu)?.exp())
}

/// Natural log of [`mixture_pdf`].
pub fn mixture_pdf_log(p: f64, params: MixtureParams, nu: Dof) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p-value must lie in (0, 1), got {p}"));
    }
    let x = central::isf(p, nu.get());
    let lr = noncentral::log_ratio(x, nu.get(), params.delta);
    Ok(log_mix(params.lambda, lr))
}

/// `ln((1 - λ) + λ e^{lr})` without overflow, for `0 <= λ <= 1`.
#[inline]
pub(crate) fn log_mix(lambda: f64, log_ratio: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda >= 1.0 {
        return log_ratio;
    }
    let a = (-lambda).ln_1p();
    let b = lambda.ln() + log_ratio;
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// One voxel's p-values mapped once to t scale; the log likelihood can then be
/// evaluated at many `(λ, δ)` without repeating the quantile computations.
/// Observations are held in sorted order, so the likelihood is bit-identical
/// under any permutation of the replications.
#[derive(Debug, Clone)]
pub struct PreparedVoxel {
    points: Vec<noncentral::RatioPoint>,
}

impl PreparedVoxel {
    pub fn new(pvals: &PValueVector) -> Self {
        let mut obs: Vec<(f64, f64)> = pvals
            .values
            .iter()
            .zip(&pvals.dofs)
            .map(|(&p, nu)| (p, nu.get()))
            .collect();
        obs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let points = obs
            .into_iter()
            .map(|(p, nu)| {
                let x = central::isf(p, nu);
                noncentral::RatioPoint::new(x, nu)
            })
            .collect();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Log likelihood at `(λ, δ)`; the caller guarantees `0 <= λ <= 1`, finite δ.
    #[inline]
    pub fn loglik(&self, lambda: f64, delta: f64) -> f64 {
        self.points
            .iter()
            .map(|pt| log_mix(lambda, pt.log_ratio(delta)))
            .sum()
    }
}

/// Log likelihood of one voxel's replicated p-values.
pub fn voxel_loglik(pvals: &PValueVector, params: MixtureParams) -> Result<f64> {
    if pvals.is_empty() {
        return domain("empty p-value vector");
    }
    Ok(PreparedVoxel::new(pvals).loglik(params.lambda, params.delta))
}
