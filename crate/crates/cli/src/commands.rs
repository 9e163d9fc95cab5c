use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use voxcert::certainty::{certainty_volume, CertaintyRecord, TauSource};
use voxcert::mle::{fit_volume, FitConfig, VoxelFit};
use voxcert::simulation::{run_simulation, simulate, split_replications, GroundTruthField, Scenario};
use voxcert::special::Dof;
use voxcert::thresholding::{bh_fdr, overlap_matrix, threshold_with_cutoffs, ActivationMap, Method};
use voxcert::volume::{
    import_csv, read_container, read_dof_sidecar, t_to_p, CsvSchema, Geometry, ReplicationSet,
    ValueKind, VolumeContainer,
};
use voxcert::Execution;

use crate::run::{sidecar, validation, CliError, CliResult, Run};
use crate::{FitOpts, Threads};

fn in_pool<T: Send>(threads: Threads, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {} threads: {e}", threads.threads)))?;
    Ok(pool.install(f))
}

fn fit_config(opts: FitOpts) -> CliResult<FitConfig> {
    let cfg = FitConfig {
        restarts: opts.restarts,
        tolerance: opts.tol,
        max_iterations: opts.max_iter,
        execution: Execution::Parallel,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn dims3(dims: &[usize]) -> CliResult<[usize; 3]> {
    match dims {
        &[x, y, z] => Ok([x, y, z]),
        _ => Err(CliError::Usage(format!("--dims takes nx,ny,nz, got {} values", dims.len()))),
    }
}

fn dof(value: f64) -> CliResult<Dof> {
    Ok(Dof::new(value)?)
}

fn read_kind(run: &mut Run, path: &Path, kind: ValueKind) -> CliResult<VolumeContainer> {
    run.input(path)?;
    let c = read_container(path)?;
    if c.kind != kind {
        return validation(format!("{}: expected a {kind} container, found {}", path.display(), c.kind));
    }
    Ok(c)
}

fn all_finite(what: &str, values: &[f64]) -> CliResult<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CliError::Numerical(format!("non-finite {what} at masked voxel {i}"))),
        None => Ok(()),
    }
}

fn shared_dof(dofs: &[Dof]) -> Vec<Dof> {
    match dofs.first() {
        Some(&d) if dofs.iter().all(|&x| x == d) => vec![d],
        _ => Vec::new(),
    }
}

fn same_geometry(a: &Geometry, b: &Geometry, what: &Path) -> CliResult<()> {
    if a != b {
        return validation(format!("{}: geometry differs from the other inputs", what.display()));
    }
    Ok(())
}

pub fn fit_cmd(input: &Path, out: &Path, opts: FitOpts, threads: Threads) -> CliResult<()> {
    let mut run = Run::new("fit", threads.threads);
    let cfg = fit_config(opts)?;
    let set = read_kind(&mut run, input, ValueKind::Pvalue)?.to_replications()?;
    run.config = json!({ "fit": cfg });
    let fits = in_pool(threads, || fit_volume(&set, &cfg))??;

    let lambda: Vec<f64> = fits.iter().map(|f| f.lambda).collect();
    let delta: Vec<f64> = fits.iter().map(|f| f.delta).collect();
    all_finite("lambda", &lambda)?;
    all_finite("delta", &delta)?;
    let g = set.geometry();
    let dofs = shared_dof(set.dofs());
    run.out_dir(out)?;
    run.write_container(&out.join("lambda.vol"), &VolumeContainer::new(g.clone(), ValueKind::Lambda, 1, dofs.clone(), lambda)?)?;
    run.write_container(&out.join("delta.vol"), &VolumeContainer::new(g.clone(), ValueKind::Delta, 1, dofs, delta)?)?;

    let mut diag = String::from("voxel,x,y,z,loglik,converged,restarts_used,clamped,evaluations\n");
    for (i, f) in fits.iter().enumerate() {
        let [x, y, z] = g.coords(g.grid_index(i));
        let _ = writeln!(
            diag,
            "{i},{x},{y},{z},{},{},{},{},{}",
            f.loglik, f.converged as u8, f.restarts_used, f.clamped, f.evaluations
        );
    }
    run.write_text(&out.join("diagnostics.csv"), &diag)?;

    run.results = json!({
        "voxels": fits.len(),
        "replications": set.m(),
        "not_converged": fits.iter().filter(|f| !f.converged).count(),
        "clamped_pvalues": set.clamped(),
    });
    run.finish(&out.join("manifest.json"))
}

enum Source {
    Frontier,
    Fdr(f64),
}

fn parse_source(s: &str) -> CliResult<Source> {
    if s == "frontier" {
        return Ok(Source::Frontier);
    }
    let q = s
        .strip_prefix("fdr:")
        .and_then(|q| q.parse::<f64>().ok())
        .ok_or_else(|| CliError::Usage(format!("--tau-source must be 'frontier' or 'fdr:q', got '{s}'")))?;
    if !(q > 0.0 && q < 1.0) {
        return validation(format!("FDR level {q} outside (0, 1)"));
    }
    Ok(Source::Fdr(q))
}

pub fn certainty_cmd(
    fits: &[PathBuf],
    composite: &Path,
    tau_source: &str,
    nu: Option<f64>,
    out: &Path,
    threads: Threads,
) -> CliResult<()> {
    let [lambda_path, delta_path] = fits else {
        return Err(CliError::Usage("--fits takes the lambda and delta containers".into()));
    };
    let source = parse_source(tau_source)?;
    let mut run = Run::new("certainty", threads.threads);
    let lambda = read_kind(&mut run, lambda_path, ValueKind::Lambda)?;
    let delta = read_kind(&mut run, delta_path, ValueKind::Delta)?;
    let comp = read_kind(&mut run, composite, ValueKind::Pvalue)?;
    same_geometry(&lambda.geometry, &delta.geometry, delta_path)?;
    same_geometry(&lambda.geometry, &comp.geometry, composite)?;
    if lambda.m != 1 || delta.m != 1 || comp.m != 1 {
        return validation("certainty expects single-valued lambda, delta and composite maps");
    }
    let nu = match (nu, lambda.dofs.first()) {
        (Some(v), _) => dof(v)?,
        (None, Some(&d)) => d,
        (None, None) => return Err(CliError::Usage("lambda map carries no degrees of freedom; pass --dof".into())),
    };
    let pvals = &comp.values;
    if let Some(i) = pvals.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return validation(format!("{}: composite p-value outside [0, 1] at masked voxel {i}", composite.display()));
    }
    let fitted: Vec<VoxelFit> = lambda
        .values
        .iter()
        .zip(&delta.values)
        .map(|(&l, &d)| VoxelFit {
            lambda: l,
            delta: d,
            loglik: f64::NAN,
            converged: true,
            restarts_used: 0,
            clamped: 0,
            evaluations: 0,
        })
        .collect();
    if let Some(i) = fitted.iter().position(|f| !(0.0..=1.0).contains(&f.lambda) || f.delta.is_nan() || f.delta < 0.0) {
        return validation(format!("fitted parameters out of range at masked voxel {i}"));
    }

    let (records, map): (Vec<CertaintyRecord>, ActivationMap) = match source {
        Source::Frontier => {
            let records = in_pool(threads, || certainty_volume(&fitted, nu, TauSource::Frontier, Execution::Parallel))??;
            let taus: Vec<f64> = records.iter().map(|r| r.tau).collect();
            let map = threshold_with_cutoffs(&taus, pvals)?;
            (records, map)
        }
        Source::Fdr(q) => {
            let map = bh_fdr(pvals, q)?;
            let taus = vec![map.cutoff.unwrap_or(0.0); pvals.len()];
            let records = in_pool(threads, || {
                certainty_volume(&fitted, nu, TauSource::External(&taus), Execution::Parallel)
            })??;
            (records, map)
        }
    };

    let g = &lambda.geometry;
    let column = |f: fn(&CertaintyRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let outputs = [
        (ValueKind::Tau, column(|r| r.tau)),
        (ValueKind::RhoPlus, column(|r| r.rho_plus)),
        (ValueKind::RhoMinus, column(|r| r.rho_minus)),
        (ValueKind::Auc, column(|r| r.auc)),
    ];
    for (kind, values) in &outputs {
        all_finite(kind.as_str(), values)?;
    }
    run.out_dir(out)?;
    for (kind, values) in outputs {
        let c = VolumeContainer::map(g.clone(), kind, values)?;
        run.write_container(&out.join(format!("{kind}.vol")), &c)?;
    }
    let decisions: Vec<f64> = map.decisions.iter().map(|&d| d as u8 as f64).collect();
    run.write_container(&out.join("decision.vol"), &VolumeContainer::map(g.clone(), ValueKind::Decision, decisions)?)?;

    let (method, cutoff) = match map.method {
        Method::Fdr { q } => (format!("fdr:{q}"), map.cutoff),
        Method::Frontier => ("frontier".to_string(), None),
    };
    run.config = json!({ "tau_source": method, "dof": nu.get() });
    run.results = json!({
        "voxels": records.len(),
        "active": map.active(),
        "bh_cutoff": cutoff,
        "threshold_degenerate": records.iter().filter(|r| r.flags.threshold_degenerate).count(),
        "boundary_tau": records.iter().filter(|r| r.flags.boundary_tau).count(),
    });
    run.finish(&out.join("manifest.json"))
}

/// `2,6,12`, `2..12` or a mix; ranges are inclusive.
fn parse_m_range(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("bad --M-range '{s}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: usize = a.parse().map_err(|_| bad())?;
                let b: usize = b.parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

pub fn simulate_cmd(
    scenario: &str,
    m_range: &str,
    n: usize,
    seed: u64,
    out: &Path,
    opts: FitOpts,
    threads: Threads,
) -> CliResult<()> {
    let ms = parse_m_range(m_range)?;
    let mut run = Run::new("simulate", threads.threads);
    let cfg = fit_config(opts)?;
    let scen = Scenario::by_name(scenario)?;
    let nu = scen.dof()?;
    let truth = GroundTruthField::generate(&scen, n, seed)?;
    let report = in_pool(threads, || run_simulation(&truth, &ms, &cfg, nu, seed))??;
    run.seed = Some(seed);
    run.config = json!({ "scenario": scen, "voxels": n, "replications": ms, "fit": cfg });
    run.write_text(out, &report.to_table())?;
    run.results = serde_json::to_value(&report).expect("report serializes");
    run.finish(&sidecar(out))
}

fn decision_map(c: &VolumeContainer) -> ActivationMap {
    ActivationMap {
        decisions: c.values.iter().map(|&v| v != 0.0).collect(),
        method: Method::Frontier,
        cutoff: None,
        voxel_cutoffs: None,
    }
}

pub fn overlap_cmd(maps: &[PathBuf], out: &Path) -> CliResult<()> {
    let mut run = Run::new("overlap", 1);
    let mut loaded = Vec::with_capacity(maps.len());
    for path in maps {
        let c = read_kind(&mut run, path, ValueKind::Decision)?;
        if let Some(first) = loaded.first() {
            let first: &VolumeContainer = first;
            same_geometry(&first.geometry, &c.geometry, path)?;
        }
        loaded.push(c);
    }
    let m = overlap_matrix(&loaded.iter().map(decision_map).collect::<Vec<_>>())?;
    let names: Vec<String> = maps.iter().map(|p| p.display().to_string()).collect();
    let mut text = format!("map,{}\n", names.join(","));
    for (name, row) in names.iter().zip(&m.values) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(text, "{name},{}", cells.join(","));
    }
    run.write_text(out, &text)?;
    let s = m.summary;
    println!(
        "pairs={} min={:.3} max={:.3} median={:.3} q1={:.3} q3={:.3} iqr={:.3}",
        s.pairs, s.min, s.max, s.median, s.q1, s.q3, s.iqr
    );
    run.results = json!({ "summary": s });
    run.finish(&sidecar(out))
}

pub fn convert_cmd(tstats: &Path, nu: Option<f64>, out: &Path) -> CliResult<()> {
    let mut run = Run::new("convert", 1);
    let c = read_kind(&mut run, tstats, ValueKind::Tstat)?;
    let dofs = match nu {
        Some(v) => vec![dof(v)?; c.m],
        None if c.dofs.len() == c.m => c.dofs.clone(),
        None => return Err(CliError::Usage("t-statistic container carries no degrees of freedom; pass --dof".into())),
    };
    let mut values = Vec::with_capacity(c.values.len());
    for (r, &d) in dofs.iter().enumerate() {
        let (p, flagged) = t_to_p(c.slice(r), d);
        if let Some(&i) = flagged.first() {
            return validation(format!("NaN t statistic in replication {r} at masked voxel {i}"));
        }
        values.extend(p);
    }
    let set = ReplicationSet::new(c.geometry.clone(), dofs.clone(), values)?;
    run.config = json!({ "dofs": dofs.iter().map(|d| d.get()).collect::<Vec<_>>() });
    run.write_container(out, &VolumeContainer::from_replications(&set))?;
    run.results = json!({ "voxels": set.n_masked(), "replications": set.m(), "clamped_pvalues": set.clamped() });
    run.finish(&sidecar(out))
}

pub fn split_cmd(input: &Path, seed: u64, out: &[PathBuf]) -> CliResult<()> {
    let [a, b] = out else {
        return Err(CliError::Usage("--out takes two container paths".into()));
    };
    if a == b {
        return Err(CliError::Usage("split outputs must differ".into()));
    }
    let mut run = Run::new("split", 1);
    let set = read_kind(&mut run, input, ValueKind::Pvalue)?.to_replications()?;
    let (first, second) = split_replications(set.m(), seed)?;
    run.write_container(a, &VolumeContainer::from_replications(&set.select(&first)?))?;
    run.write_container(b, &VolumeContainer::from_replications(&set.select(&second)?))?;
    run.seed = Some(seed);
    run.results = json!({ "first": first, "second": second });
    run.finish(&sidecar(a))
}

pub fn generate_cmd(scenario: &str, dims: &[usize], m: usize, seed: u64, out: &Path, threads: Threads) -> CliResult<()> {
    let mut run = Run::new("generate", threads.threads);
    let scen = Scenario::by_name(scenario)?;
    let nu = scen.dof()?;
    let g = Geometry::full(dims3(dims)?)?;
    let truth = GroundTruthField::generate(&scen, g.n_masked(), seed)?;
    let data = in_pool(threads, || simulate(&truth, &g, m, nu, seed, Execution::Parallel))??;
    run.seed = Some(seed);
    run.config = json!({ "scenario": scen, "dims": dims, "replications": m });
    run.out_dir(out)?;
    run.write_container(&out.join("replications.vol"), &VolumeContainer::from_replications(&data.replications))?;
    let comp = VolumeContainer::new(g.clone(), ValueKind::Pvalue, 1, vec![data.composite_nu], data.composite)?;
    run.write_container(&out.join("composite.vol"), &comp)?;
    let lambda = truth.params.iter().map(|p| p.lambda()).collect();
    let delta = truth.params.iter().map(|p| p.delta()).collect();
    run.write_container(&out.join("truth_lambda.vol"), &VolumeContainer::new(g.clone(), ValueKind::Lambda, 1, vec![nu], lambda)?)?;
    run.write_container(&out.join("truth_delta.vol"), &VolumeContainer::new(g, ValueKind::Delta, 1, vec![nu], delta)?)?;
    run.results = json!({ "components": truth.component });
    run.finish(&out.join("manifest.json"))
}

pub fn dump_cmd(input: &Path, index: usize, slice: Option<usize>, out: &Path) -> CliResult<()> {
    let mut run = Run::new("dump", 1);
    run.input(input)?;
    let c = read_container(input)?;
    if index >= c.m {
        return validation(format!("index {index} out of range 0..{}", c.m));
    }
    let g = &c.geometry;
    if let Some(z) = slice {
        if z >= g.dims()[2] {
            return validation(format!("slice {z} out of range 0..{}", g.dims()[2]));
        }
    }
    let mut text = format!("x,y,z,{}\n", c.kind);
    for (i, v) in c.slice(index).iter().enumerate() {
        let [x, y, z] = g.coords(g.grid_index(i));
        if slice.is_none_or(|s| s == z) {
            let _ = writeln!(text, "{x},{y},{z},{v}");
        }
    }
    run.write_text(out, &text)?;
    run.config = json!({ "index": index, "slice": slice });
    run.finish(&sidecar(out))
}

pub fn import_cmd(
    csv: &Path,
    value: &str,
    dofs: &[f64],
    dof_file: Option<&Path>,
    dims: Option<&[usize]>,
    out: &Path,
) -> CliResult<()> {
    let mut run = Run::new("import", 1);
    let kind: ValueKind = value.parse().map_err(CliError::Usage)?;
    run.input(csv)?;
    let dofs = match dof_file {
        Some(f) => {
            run.input(f)?;
            read_dof_sidecar(f)?
        }
        None if dofs.is_empty() => return Err(CliError::Usage("pass --dof or --dof-file".into())),
        None => dofs.iter().map(|&v| dof(v)).collect::<CliResult<_>>()?,
    };
    let dims = dims.map(dims3).transpose()?;
    let schema = CsvSchema { value: kind, dofs, dims };
    let set = import_csv(csv, &schema)?;
    run.write_container(out, &VolumeContainer::from_replications(&set))?;
    run.results = json!({ "voxels": set.n_masked(), "replications": set.m(), "clamped_pvalues": set.clamped() });
    run.finish(&sidecar(out))
}
