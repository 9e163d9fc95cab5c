//! Per-voxel maximum likelihood estimation of `(λ, δ)`.
//!
//! The simplex runs on `(u, v) = (logit λ, ln(δ - 1))`. Each start is run to
//! convergence and the best end point is restarted once more.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::exec::{map_range, Execution};
use crate::model::{PValueVector, PreparedVoxel};
use crate::optim::NelderMead;
use crate::volume::ReplicationSet;

/// Lower limit on δ in the estimation space.
pub const DELTA_FLOOR: f64 = 1.0;

/// Starting points `(λ, δ)`, in the order they are used.
pub const START_POINTS: [(f64, f64); 9] = [
    (0.5, 3.0),
    (0.1, 1.5),
    (0.9, 6.0),
    (0.1, 6.0),
    (0.9, 1.5),
    (0.5, 1.5),
    (0.5, 6.0),
    (0.1, 3.0),
    (0.9, 3.0),
];

// Box on the internal coordinates: λ ∈ [1e-12, 1 - 1e-12], δ ∈ (1, 1000].
const U_BOUND: f64 = 27.631_021_115_928_547;
const V_LOWER: f64 = -30.0;
const V_UPPER: f64 = 6.906_754_778_648_554;
const STEP: [f64; 2] = [1.0, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of entries of [`START_POINTS`] to run, `1..=9`.
    pub restarts: usize,
    /// Simplex function-value spread at which a run has converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub execution: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: START_POINTS.len(),
            tolerance: 1e-9,
            max_iterations: 500,
            execution: Execution::Parallel,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.restarts > START_POINTS.len() {
            return domain(format!(
                "restarts must be between 1 and {}, got {}",
                START_POINTS.len(),
                self.restarts
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return domain(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            return domain("max iterations must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelFit {
    pub lambda: f64,
    pub delta: f64,
    pub loglik: f64,
    /// At least one simplex run met the tolerance.
    pub converged: bool,
    /// Simplex runs performed, including the final restart.
    pub restarts_used: usize,
    /// Input p-values moved by clamping.
    pub clamped: usize,
    pub evaluations: usize,
}

#[inline]
fn to_params(z: &[f64; 2]) -> (f64, f64) {
    let lambda = 1.0 / (1.0 + (-z[0]).exp());
    let delta = DELTA_FLOOR + z[1].exp();
    (lambda, delta)
}

#[inline]
fn to_internal(lambda: f64, delta: f64) -> [f64; 2] {
    [(lambda / (1.0 - lambda)).ln(), (delta - DELTA_FLOOR).ln()]
}

/// Fits one voxel whose p-values have already been mapped to t scale.
pub fn fit_prepared(voxel: &PreparedVoxel, clamped: usize, config: &FitConfig) -> VoxelFit {
    let nm = NelderMead::<2>::new(config.tolerance, config.max_iterations)
        .with_bounds([-U_BOUND, V_LOWER], [U_BOUND, V_UPPER]);
    let objective = |z: &[f64; 2]| {
        let (l, d) = to_params(z);
        -voxel.loglik(l, d)
    };

    let mut best: Option<([f64; 2], f64)> = None;
    let mut converged = false;
    let mut evaluations = 0;
    let mut runs = 0;
    let mut take = |m: crate::optim::Minimum<2>, best: &mut Option<([f64; 2], f64)>| {
        converged |= m.converged;
        evaluations += m.evaluations;
        runs += 1;
        if best.is_none_or(|(_, f)| m.f < f) {
            *best = Some((m.x, m.f));
        }
    };
    for &(l, d) in &START_POINTS[..config.restarts] {
        let m = nm.minimize(objective, to_internal(l, d), STEP);
        take(m, &mut best);
    }
    let (z, _) = best.expect("at least one start");
    let m = nm.minimize(objective, z, STEP);
    take(m, &mut best);

    let (z, _) = best.expect("at least one start");
    let (lambda, delta) = to_params(&z);
    VoxelFit {
        lambda,
        delta,
        loglik: voxel.loglik(lambda, delta),
        converged,
        restarts_used: runs,
        clamped,
        evaluations,
    }
}

/// Maximum likelihood `(λ̂, δ̂)` for one voxel.
pub fn fit_voxel(pvals: &PValueVector, config: &FitConfig) -> Result<VoxelFit> {
    config.validate()?;
    if pvals.is_empty() {
        return domain("empty p-value vector");
    }
    Ok(fit_prepared(&PreparedVoxel::new(pvals), pvals.clamped(), config))
}

/// Fits every masked voxel independently, in mask order.
pub fn fit_volume(data: &ReplicationSet, config: &FitConfig) -> Result<Vec<VoxelFit>> {
    config.validate()?;
    let n = data.n_masked();
    if n == 0 {
        return domain("mask selects no voxels");
    }
    Ok(map_range(config.execution, n, |i| {
        let v = data.voxel(i);
        fit_prepared(&PreparedVoxel::new(&v), v.clamped(), config)
    }))
}
