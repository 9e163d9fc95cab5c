//! Ground-truth simulation and scoring of the fitting pipeline.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! `(seed, purpose, voxel, replication)`, so generated data do not depend on
//! how voxels are scheduled across workers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::certainty::{certainty_volume, CertaintyRecord, TauSource};
use crate::error::{domain, Result};
use crate::exec::{map_range, Execution};
use crate::mle::{fit_volume, FitConfig, VoxelFit};
use crate::model::{clamp_pvalue, log_mix, MixtureParams};
use crate::quadrature::integrate_adaptive;
use crate::special::{central, noncentral, Dof};
use crate::thresholding::threshold_with_cutoffs;
use crate::volume::{Geometry, ReplicationSet};

/// One class of voxels in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub fraction: f64,
    pub lambda: f64,
    pub delta: f64,
}

/// A recipe for ground-truth parameter fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub components: Vec<Component>,
    pub nu: f64,
}

/// δ assigned to null-like voxels, where it barely affects the density.
pub const NULL_DELTA: f64 = 2.0;

impl Scenario {
    /// 85% null, 10% moderate, 5% strong activation.
    pub fn sparse() -> Self {
        Self {
            name: "sparse".into(),
            components: vec![
                Component { fraction: 0.85, lambda: 0.02, delta: NULL_DELTA },
                Component { fraction: 0.10, lambda: 0.7, delta: 3.0 },
                Component { fraction: 0.05, lambda: 0.95, delta: 6.0 },
            ],
            nu: 122.0,
        }
    }

    /// 60% null, 25% moderate, 15% strong activation.
    pub fn moderate() -> Self {
        Self {
            name: "moderate".into(),
            components: vec![
                Component { fraction: 0.60, lambda: 0.02, delta: NULL_DELTA },
                Component { fraction: 0.25, lambda: 0.6, delta: 3.0 },
                Component { fraction: 0.15, lambda: 0.9, delta: 5.0 },
            ],
            nu: 122.0,
        }
    }

    pub fn names() -> [&'static str; 2] {
        ["sparse", "moderate"]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sparse" | "default" => Ok(Self::sparse()),
            "moderate" => Ok(Self::moderate()),
            other => domain(format!(
                "unknown scenario '{other}', expected one of {:?}",
                Self::names()
            )),
        }
    }

    pub fn dof(&self) -> Result<Dof> {
        Dof::new(self.nu)
    }

    fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return domain("scenario has no components");
        }
        let total: f64 = self.components.iter().map(|c| c.fraction).sum();
        if (total - 1.0).abs() > 1e-9 || self.components.iter().any(|c| c.fraction < 0.0) {
            return domain(format!("component fractions must be nonnegative and sum to 1, got {total}"));
        }
        for c in &self.components {
            MixtureParams::new(c.lambda, c.delta)?;
            if c.lambda >= 1.0 || (c.lambda > 0.0 && c.delta <= 1.0) {
                return domain(format!("component ({}, {}) outside 0 <= λ < 1, δ > 1", c.lambda, c.delta));
            }
        }
        Dof::new(self.nu).map(|_| ())
    }
}

/// Per-voxel true parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthField {
    pub params: Vec<MixtureParams>,
    /// Index into the scenario's components for each voxel.
    pub component: Vec<usize>,
    pub scenario: String,
    pub seed: u64,
}

impl GroundTruthField {
    /// Assigns `round(fraction × n)` voxels to each component (the last takes
    /// the remainder) and shuffles the assignment.
    pub fn generate(scenario: &Scenario, n: usize, seed: u64) -> Result<Self> {
        scenario.validate()?;
        if n == 0 {
            return domain("ground truth needs at least one voxel");
        }
        let k = scenario.components.len();
        let mut component = Vec::with_capacity(n);
        for (j, c) in scenario.components.iter().enumerate() {
            let count = if j + 1 == k {
                n - component.len()
            } else {
                ((c.fraction * n as f64).round() as usize).min(n - component.len())
            };
            component.extend(std::iter::repeat_n(j, count));
        }
        component.shuffle(&mut stream(seed, Purpose::Truth, 0, 0));
        let params = component
            .iter()
            .map(|&j| {
                let c = scenario.components[j];
                MixtureParams::new(c.lambda, c.delta)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            params,
            component,
            scenario: scenario.name.clone(),
            seed,
        })
    }

    /// A field taking fitted values as truth.
    pub fn from_fits(fits: &[VoxelFit], scenario: &str, seed: u64) -> Result<Self> {
        let params = fits
            .iter()
            .map(|f| MixtureParams::new(f.lambda, f.delta))
            .collect::<Result<_>>()?;
        Ok(Self {
            params,
            component: vec![0; fits.len()],
            scenario: scenario.into(),
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Truth = 1,
    Replication = 2,
    Composite = 3,
    Split = 4,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(seed: u64, purpose: Purpose, voxel: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(purpose as u64)));
    rng.set_stream(splitmix(voxel.wrapping_mul(0x1_0000_0001) ^ splitmix(rep)));
    rng
}

/// A draw of `t(ν, δ)` as `(Z + δ) / sqrt(V / ν)`.
fn sample_nct<R: Rng + ?Sized>(nu: f64, delta: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let v = ChiSquared::new(nu).expect("positive dof").sample(rng);
    (z + delta) / (v / nu).sqrt()
}

/// One p-value from the mixture, and whether it came from the alternative.
pub fn sample_pvalue_labelled<R: Rng + ?Sized>(params: MixtureParams, nu: Dof, rng: &mut R) -> (f64, bool) {
    let active = rng.random::<f64>() < params.lambda();
    let p = if active {
        central::sf(sample_nct(nu.get(), params.delta(), rng), nu.get())
    } else {
        rng.random::<f64>()
    };
    (clamp_pvalue(p).0, active)
}

/// One p-value from the mixture, clamped into `[1e-12, 1 - 1e-12]`.
pub fn sample_pvalue<R: Rng + ?Sized>(params: MixtureParams, nu: Dof, rng: &mut R) -> f64 {
    sample_pvalue_labelled(params, nu, rng).0
}

/// Simulated replications plus the composite p-values of the pooled data.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub replications: ReplicationSet,
    /// Upper-tail p-value of the pooled statistic at each voxel.
    pub composite: Vec<f64>,
    /// Degrees of freedom of the pooled statistic, `M ν`.
    pub composite_nu: Dof,
}

/// Draws `m` replications for every voxel of `truth`. The pooled statistic has
/// non-centrality `δ k / sqrt(M)`, `k` being the number of replications drawn
/// from the alternative, and `M ν` degrees of freedom.
pub fn simulate(
    truth: &GroundTruthField,
    geometry: &Geometry,
    m: usize,
    nu: Dof,
    seed: u64,
    exec: Execution,
) -> Result<SimulatedData> {
    let n = truth.len();
    if geometry.n_masked() != n {
        return Err(crate::Error::Shape(format!(
            "{} ground-truth voxels for {} masked voxels",
            n,
            geometry.n_masked()
        )));
    }
    if m == 0 {
        return domain("at least one replication is required");
    }
    let nu_c = m as f64 * nu.get();
    let per_voxel = map_range(exec, n, |i| {
        let params = truth.params[i];
        let mut values = Vec::with_capacity(m);
        let mut k = 0usize;
        for r in 0..m {
            let mut rng = stream(seed, Purpose::Replication, i as u64, r as u64);
            let (p, active) = sample_pvalue_labelled(params, nu, &mut rng);
            values.push(p);
            k += active as usize;
        }
        let mut rng = stream(seed, Purpose::Composite, i as u64, m as u64);
        let ncp = params.delta() * k as f64 / (m as f64).sqrt();
        let t = sample_nct(nu_c, ncp, &mut rng);
        values.push(clamp_pvalue(central::sf(t, nu_c)).0);
        values
    });
    let mut pvalues = vec![0.0; m * n];
    let mut composite = Vec::with_capacity(n);
    for (i, v) in per_voxel.iter().enumerate() {
        for r in 0..m {
            pvalues[r * n + i] = v[r];
        }
        composite.push(v[m]);
    }
    Ok(SimulatedData {
        replications: ReplicationSet::new(geometry.clone(), vec![nu; m], pvalues)?,
        composite,
        composite_nu: Dof::new(nu_c)?,
    })
}

#[inline]
fn sqrt_density(lambda: f64, point: &noncentral::RatioPoint, delta: f64) -> f64 {
    (0.5 * log_mix(lambda, point.log_ratio(delta))).exp()
}

/// Squared Hellinger distance `∫₀¹ (√f_a − √f_b)² dp` between two mixture
/// densities, integrated on the t scale `x = Ψ⁻¹_ν(1 − p)` where
/// `dp = ψ_ν(x) dx`, after mapping `x = s / (1 − s²)`.
pub fn hellinger_sq(a: MixtureParams, b: MixtureParams, nu: Dof) -> f64 {
    let n = nu.get();
    let ln_c = central::log_norm(n);
    let f = |s: f64| {
        let d = 1.0 - s * s;
        let x = s / d;
        let jac = (1.0 + s * s) / (d * d);
        let pt = noncentral::RatioPoint::new(x, n);
        let diff = sqrt_density(a.lambda(), &pt, a.delta()) - sqrt_density(b.lambda(), &pt, b.delta());
        if diff == 0.0 {
            return 0.0;
        }
        diff * diff * (central::pdf_log_with(x, n, ln_c)).exp() * jac
    };
    integrate_adaptive(f, -1.0, 1.0, 1e-10, 1e-10, 400).clamp(0.0, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub rmse_lambda: f64,
    pub rmse_delta: f64,
    pub mean_shd: f64,
}

/// RMSEs of the estimates and mean squared Hellinger distance to the truth.
pub fn score(truth: &GroundTruthField, fits: &[VoxelFit], nu: Dof, exec: Execution) -> Result<Score> {
    if truth.len() != fits.len() || fits.is_empty() {
        return Err(crate::Error::Shape(format!(
            "{} fits for {} ground-truth voxels",
            fits.len(),
            truth.len()
        )));
    }
    let n = fits.len() as f64;
    let mut sl = 0.0;
    let mut sd = 0.0;
    for (t, f) in truth.params.iter().zip(fits) {
        sl += (f.lambda - t.lambda()).powi(2);
        sd += (f.delta - t.delta()).powi(2);
    }
    let shd = map_range(exec, fits.len(), |i| {
        let fit = MixtureParams::new(fits[i].lambda, fits[i].delta).expect("fits are in range");
        hellinger_sq(fit, truth.params[i], nu)
    });
    Ok(Score {
        rmse_lambda: (sl / n).sqrt(),
        rmse_delta: (sd / n).sqrt(),
        mean_shd: shd.iter().sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub replications: usize,
    pub rmse_lambda: f64,
    pub rmse_delta: f64,
    pub average_shd: f64,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub seed: u64,
    pub voxels: usize,
    pub nu: f64,
    pub rows: Vec<SimulationRow>,
}

impl SimulationReport {
    pub const HEADER: &'static str = "replications,rmse_lambda,rmse_delta,average_shd";

    /// Comma-separated table, one row per replication count.
    pub fn to_table(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                r.replications, r.rmse_lambda, r.rmse_delta, r.average_shd
            ));
        }
        out
    }
}

/// Simulates, fits and scores the truth field for each replication count.
pub fn run_simulation(
    truth: &GroundTruthField,
    m_range: &[usize],
    config: &FitConfig,
    nu: Dof,
    seed: u64,
) -> Result<SimulationReport> {
    if truth.is_empty() {
        return domain("ground truth is empty");
    }
    if m_range.is_empty() || m_range.contains(&0) {
        return domain("replication counts must be positive");
    }
    let geometry = Geometry::full([truth.len(), 1, 1])?;
    let mut rows = Vec::with_capacity(m_range.len());
    for &m in m_range {
        let data = simulate(truth, &geometry, m, nu, seed, config.execution)?;
        let fits = fit_volume(&data.replications, config)?;
        let s = score(truth, &fits, nu, config.execution)?;
        rows.push(SimulationRow {
            replications: m,
            rmse_lambda: s.rmse_lambda,
            rmse_delta: s.rmse_delta,
            average_shd: s.mean_shd,
            not_converged: fits.iter().filter(|f| !f.converged).count(),
        });
    }
    Ok(SimulationReport {
        scenario: truth.scenario.clone(),
        seed,
        voxels: truth.len(),
        nu: nu.get(),
        rows,
    })
}

/// Seeded split of `0..m` into two halves of `m / 2`.
pub fn split_replications(m: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if m < 4 || m % 2 == 1 {
        return domain(format!("split needs an even number of at least 4 replications, got {m}"));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut stream(seed, Purpose::Split, 0, m as u64));
    let (a, b) = order.split_at(m / 2);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    /// Fraction of voxels with the same frontier decision in both halves.
    pub agreement: f64,
    pub mean_abs_diff_rho_plus: f64,
    pub mean_abs_diff_rho_minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub fits: [Vec<VoxelFit>; 2],
    pub records: [Vec<CertaintyRecord>; 2],
    pub decisions: [Vec<bool>; 2],
    pub summary: SplitSummary,
}

/// Fits the two halves of a seeded replication split separately and compares
/// the frontier decisions and certainties they give on the composite map.
pub fn robustness_split(
    data: &ReplicationSet,
    composite: &[f64],
    config: &FitConfig,
    nu: Dof,
    seed: u64,
) -> Result<SplitResult> {
    let (first, second) = split_replications(data.m(), seed)?;
    split_with(data, composite, config, nu, first, second)
}

/// As [`robustness_split`] with an explicit partition.
pub fn split_with(
    data: &ReplicationSet,
    composite: &[f64],
    config: &FitConfig,
    nu: Dof,
    first: Vec<usize>,
    second: Vec<usize>,
) -> Result<SplitResult> {
    if composite.len() != data.n_masked() {
        return Err(crate::Error::Shape(format!(
            "{} composite p-values for {} masked voxels",
            composite.len(),
            data.n_masked()
        )));
    }
    let half = |reps: &[usize]| -> Result<(Vec<VoxelFit>, Vec<CertaintyRecord>, Vec<bool>)> {
        let fits = fit_volume(&data.select(reps)?, config)?;
        let records = certainty_volume(&fits, nu, TauSource::Frontier, config.execution)?;
        let taus: Vec<f64> = records.iter().map(|r| r.tau).collect();
        let decisions = threshold_with_cutoffs(&taus, composite)?.decisions;
        Ok((fits, records, decisions))
    };
    let (fa, ra, da) = half(&first)?;
    let (fb, rb, db) = half(&second)?;
    let n = composite.len() as f64;
    let agreement = da.iter().zip(&db).filter(|(a, b)| a == b).count() as f64 / n;
    let mean_abs = |g: fn(&CertaintyRecord) -> f64| {
        ra.iter().zip(&rb).map(|(a, b)| (g(a) - g(b)).abs()).sum::<f64>() / n
    };
    let summary = SplitSummary {
        first,
        second,
        agreement,
        mean_abs_diff_rho_plus: mean_abs(|r| r.rho_plus),
        mean_abs_diff_rho_minus: mean_abs(|r| r.rho_minus),
    };
    Ok(SplitResult {
        fits: [fa, fb],
        records: [ra, rb],
        decisions: [da, db],
        summary,
    })
}
