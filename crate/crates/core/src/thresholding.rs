//! Activation decisions and agreement between activation maps.

use serde::{Deserialize, Serialize};

use crate::certainty::optimal_threshold_raw;
use crate::error::{domain, shape, Result};
use crate::exec::{map_range, Execution};
use crate::mle::VoxelFit;
use crate::special::Dof;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Frontier,
    Fdr { q: f64 },
}

/// Per-voxel decisions over the mask, in mask order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMap {
    pub decisions: Vec<bool>,
    pub method: Method,
    /// For FDR the largest rejected p-value, 0 when nothing is rejected.
    pub cutoff: Option<f64>,
    /// For frontier maps the threshold applied at each voxel.
    pub voxel_cutoffs: Option<Vec<f64>>,
}

impl ActivationMap {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn active(&self) -> usize {
        self.decisions.iter().filter(|&&d| d).count()
    }

    /// `true` where every active voxel of `other` is active here too.
    pub fn contains(&self, other: &ActivationMap) -> bool {
        self.decisions
            .iter()
            .zip(&other.decisions)
            .all(|(&a, &b)| a || !b)
    }
}

/// Benjamini–Hochberg step-up at level `q` over all entries.
pub fn bh_fdr(pvals: &[f64], q: f64) -> Result<ActivationMap> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("FDR level must lie in (0, 1), got {q}"));
    }
    if pvals.is_empty() {
        return domain("FDR needs at least one voxel");
    }
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return domain(format!("p-value outside [0, 1]: {p}"));
    }
    let n = pvals.len();
    let mut sorted = pvals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (1..=n)
        .rev()
        .find(|&j| sorted[j - 1] <= j as f64 * q / n as f64);
    let cutoff = k.map_or(0.0, |j| sorted[j - 1]);
    let decisions = match k {
        Some(_) => pvals.iter().map(|&p| p <= cutoff).collect(),
        None => vec![false; n],
    };
    Ok(ActivationMap {
        decisions,
        method: Method::Fdr { q },
        cutoff: Some(cutoff),
        voxel_cutoffs: None,
    })
}

/// `2 |A ∩ B| / (|A| + |B|)`; 1 when both maps are empty.
pub fn percent_overlap(a: &ActivationMap, b: &ActivationMap) -> Result<f64> {
    if a.len() != b.len() {
        return shape(format!("maps cover {} and {} voxels", a.len(), b.len()));
    }
    let (na, nb) = (a.active(), b.active());
    if na + nb == 0 {
        return Ok(1.0);
    }
    let both = a
        .decisions
        .iter()
        .zip(&b.decisions)
        .filter(|(&x, &y)| x && y)
        .count();
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub pairs: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub values: Vec<Vec<f64>>,
    pub summary: OverlapSummary,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// All pairwise overlaps, with a summary of the off-diagonal values.
pub fn overlap_matrix(maps: &[ActivationMap]) -> Result<OverlapMatrix> {
    let m = maps.len();
    if m < 2 {
        return domain("overlap matrix needs at least two maps");
    }
    let mut values = vec![vec![1.0; m]; m];
    let mut off = Vec::with_capacity(m * (m - 1) / 2);
    for j in 0..m {
        for k in j + 1..m {
            let r = percent_overlap(&maps[j], &maps[k])?;
            values[j][k] = r;
            values[k][j] = r;
            off.push(r);
        }
    }
    off.sort_by(f64::total_cmp);
    let q1 = quantile(&off, 0.25);
    let q3 = quantile(&off, 0.75);
    Ok(OverlapMatrix {
        values,
        summary: OverlapSummary {
            pairs: off.len(),
            min: off[0],
            max: off[off.len() - 1],
            median: quantile(&off, 0.5),
            q1,
            q3,
            iqr: q3 - q1,
        },
    })
}

/// Voxel `i` is active when `pvals[i] <= cutoffs[i]`.
pub fn threshold_with_cutoffs(cutoffs: &[f64], pvals: &[f64]) -> Result<ActivationMap> {
    if cutoffs.len() != pvals.len() {
        return shape(format!(
            "{} thresholds for {} composite p-values",
            cutoffs.len(),
            pvals.len()
        ));
    }
    Ok(ActivationMap {
        decisions: pvals.iter().zip(cutoffs).map(|(&p, &t)| p <= t).collect(),
        method: Method::Frontier,
        cutoff: None,
        voxel_cutoffs: Some(cutoffs.to_vec()),
    })
}

/// Thresholds the composite p-values at each voxel's frontier maximiser.
pub fn threshold_with_frontier(
    fits: &[VoxelFit],
    nu: Dof,
    composite: &[f64],
    exec: Execution,
) -> Result<ActivationMap> {
    if fits.len() != composite.len() {
        return shape(format!(
            "{} fits for {} composite p-values",
            fits.len(),
            composite.len()
        ));
    }
    let taus = map_range(exec, fits.len(), |i| {
        optimal_threshold_raw(fits[i].lambda, fits[i].delta, nu.get()).tau
    });
    threshold_with_cutoffs(&taus, composite)
}
