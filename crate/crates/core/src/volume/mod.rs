//! Masked 3-D volumes and replicated p-value stacks.

mod container;
mod import;

pub use container::{read_container, write_container, ValueKind, VolumeContainer, MAGIC, VERSION};
pub use import::{import_csv, read_dof_sidecar, CsvSchema};

use crate::error::{domain, shape, Result};
use crate::model::{clamp_pvalue, PValueVector};
use crate::special::{central, Dof};

/// Grid dimensions and the mask of analysed voxels. Voxels are numbered with
/// `x` fastest, then `y`, then `z`; masked voxels keep that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geometry {
    dims: [usize; 3],
    mask: Vec<bool>,
    masked: Vec<usize>,
}

impl Geometry {
    pub fn new(dims: [usize; 3], mask: Vec<bool>) -> Result<Self> {
        if dims.contains(&0) {
            return shape(format!("dimensions must be positive, got {dims:?}"));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| crate::Error::Shape(format!("dimensions overflow: {dims:?}")))?;
        if mask.len() != total {
            return shape(format!("mask has {} entries, grid has {total}", mask.len()));
        }
        let masked = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        Ok(Self { dims, mask, masked })
    }

    /// Every voxel of the grid is masked in.
    pub fn full(dims: [usize; 3]) -> Result<Self> {
        let total = dims.iter().product();
        Self::new(dims, vec![true; total])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn n_masked(&self) -> usize {
        self.masked.len()
    }

    /// Flat grid index of the `i`-th masked voxel.
    pub fn grid_index(&self, i: usize) -> usize {
        self.masked[i]
    }

    pub fn coords(&self, flat: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [flat % nx, (flat / nx) % ny, flat / (nx * ny)]
    }

    pub fn flat(&self, c: [usize; 3]) -> usize {
        let [nx, ny, _] = self.dims;
        c[0] + nx * (c[1] + ny * c[2])
    }

    /// Scatters mask-ordered values onto the full grid, filling with `fill`.
    pub fn expand(&self, values: &[f64], fill: f64) -> Result<Vec<f64>> {
        if values.len() != self.n_masked() {
            return shape(format!(
                "{} values for {} masked voxels",
                values.len(),
                self.n_masked()
            ));
        }
        let mut out = vec![fill; self.len()];
        for (&g, &v) in self.masked.iter().zip(values) {
            out[g] = v;
        }
        Ok(out)
    }

    /// Gathers the masked entries of a full-grid array.
    pub fn compress(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.len() != self.len() {
            return shape(format!("{} values for a grid of {}", grid.len(), self.len()));
        }
        Ok(self.masked.iter().map(|&g| grid[g]).collect())
    }
}

/// `M` replicated p-value maps on a common mask.
///
/// Values are stored replication-major: entry `r * N + i` is replication `r`
/// at masked voxel `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSet {
    geometry: Geometry,
    dofs: Vec<Dof>,
    pvalues: Vec<f64>,
    clamped: usize,
}

impl ReplicationSet {
    /// Checks `pvalues.len() == M * N` and the `[0, 1]` range, then clamps.
    pub fn new(geometry: Geometry, dofs: Vec<Dof>, mut pvalues: Vec<f64>) -> Result<Self> {
        let m = dofs.len();
        if m == 0 {
            return shape("at least one replication is required");
        }
        let n = geometry.n_masked();
        if pvalues.len() != m * n {
            return shape(format!(
                "{} p-values for {m} replications of {n} masked voxels",
                pvalues.len()
            ));
        }
        let mut clamped = 0;
        for (k, p) in pvalues.iter_mut().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return domain(format!(
                    "p-value {} outside [0, 1] at replication {}, masked voxel {}",
                    p,
                    k / n.max(1),
                    k % n.max(1)
                ));
            }
            let (c, moved) = clamp_pvalue(*p);
            clamped += moved as usize;
            *p = c;
        }
        Ok(Self {
            geometry,
            dofs,
            pvalues,
            clamped,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn m(&self) -> usize {
        self.dofs.len()
    }

    pub fn n_masked(&self) -> usize {
        self.geometry.n_masked()
    }

    /// Values moved by clamping at construction.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    /// Replication `r` over the masked voxels.
    pub fn replication(&self, r: usize) -> &[f64] {
        let n = self.n_masked();
        &self.pvalues[r * n..(r + 1) * n]
    }

    /// The `M` p-values of masked voxel `i`.
    pub fn voxel(&self, i: usize) -> PValueVector {
        let n = self.n_masked();
        let values = (0..self.m()).map(|r| self.pvalues[r * n + i]).collect();
        PValueVector::new(values, self.dofs.clone()).expect("validated at construction")
    }

    /// A new set holding the listed replications, in the listed order.
    pub fn select(&self, reps: &[usize]) -> Result<Self> {
        if let Some(&bad) = reps.iter().find(|&&r| r >= self.m()) {
            return shape(format!("replication {bad} out of range 0..{}", self.m()));
        }
        let mut pvalues = Vec::with_capacity(reps.len() * self.n_masked());
        for &r in reps {
            pvalues.extend_from_slice(self.replication(r));
        }
        let dofs = reps.iter().map(|&r| self.dofs[r]).collect();
        Self::new(self.geometry.clone(), dofs, pvalues)
    }

    /// Appends the replications of `other`, which must share the geometry.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.geometry != other.geometry {
            return shape("replication sets have different geometry");
        }
        let mut pvalues = self.pvalues.clone();
        pvalues.extend_from_slice(&other.pvalues);
        let mut dofs = self.dofs.clone();
        dofs.extend_from_slice(&other.dofs);
        Self::new(self.geometry.clone(), dofs, pvalues)
    }
}

/// One-sided upper-tail p-values `P(t_ν >= T)`. Entries with NaN `T` come back
/// as NaN and their positions are listed in the second element.
pub fn t_to_p(tstats: &[f64], nu: Dof) -> (Vec<f64>, Vec<usize>) {
    let mut flagged = Vec::new();
    let p = tstats
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if t.is_nan() {
                flagged.push(i);
                f64::NAN
            } else {
                central::sf(t, nu.get())
            }
        })
        .collect();
    (p, flagged)
}
