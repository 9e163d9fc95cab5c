//! Import of replicated maps from delimited text.
//!
//! Columns are `x,y,z,rep,pvalue` or `x,y,z,rep,tstat`, with a header row.
//! Replication labels are integers; their sorted distinct values define the
//! replication order. Voxels that never appear are unmasked.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{t_to_p, Geometry, ReplicationSet, ValueKind};
use crate::error::{Error, Result};
use crate::special::Dof;

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    /// [`ValueKind::Pvalue`] or [`ValueKind::Tstat`].
    pub value: ValueKind,
    /// One value shared by all replications, or one per replication.
    pub dofs: Vec<Dof>,
    /// Grid size; inferred from the largest coordinates when absent.
    pub dims: Option<[usize; 3]>,
}

fn schema_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Schema(msg.into()))
}

/// Reads whitespace- or comma-separated degrees of freedom.
pub fn read_dof_sidecar(path: impl AsRef<Path>) -> Result<Vec<Dof>> {
    let text = fs::read_to_string(path.as_ref())?;
    let dofs = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Schema(format!("bad degrees of freedom '{s}'")))
                .and_then(Dof::new)
        })
        .collect::<Result<Vec<_>>>()?;
    if dofs.is_empty() {
        return schema_err(format!("{}: no degrees of freedom", path.as_ref().display()));
    }
    Ok(dofs)
}

pub fn import_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<ReplicationSet> {
    let column = match schema.value {
        ValueKind::Pvalue => "pvalue",
        ValueKind::Tstat => "tstat",
        other => return schema_err(format!("cannot import value kind {other}")),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let expected = ["x", "y", "z", "rep", column];
    let headers = reader.headers()?.clone();
    if headers.len() != 5 || headers.iter().zip(expected).any(|(h, e)| !h.eq_ignore_ascii_case(e)) {
        return schema_err(format!(
            "expected columns {}, found {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        ));
    }

    let mut cells: BTreeMap<([usize; 3], i64), f64> = BTreeMap::new();
    let mut reps = BTreeSet::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let int = |k: usize| -> Result<i64> {
            rec[k]
                .parse::<i64>()
                .map_err(|_| Error::Schema(format!("line {line}: bad {} '{}'", expected[k], &rec[k])))
        };
        let coord = |k: usize| -> Result<usize> {
            usize::try_from(int(k)?)
                .map_err(|_| Error::Schema(format!("line {line}: negative {}", expected[k])))
        };
        let c = [coord(0)?, coord(1)?, coord(2)?];
        let rep = int(3)?;
        let value: f64 = rec[4]
            .parse()
            .map_err(|_| Error::Schema(format!("line {line}: bad {column} '{}'", &rec[4])))?;
        if cells.insert((c, rep), value).is_some() {
            return schema_err(format!(
                "line {line}: duplicate row for voxel ({}, {}, {}) replication {rep}",
                c[0], c[1], c[2]
            ));
        }
        reps.insert(rep);
    }
    if cells.is_empty() {
        return schema_err("no data rows");
    }

    let reps: Vec<i64> = reps.into_iter().collect();
    let m = reps.len();
    let dofs = match schema.dofs.len() {
        1 => vec![schema.dofs[0]; m],
        n if n == m => schema.dofs.clone(),
        n => return schema_err(format!("{n} degrees of freedom for {m} replications")),
    };

    let voxels: BTreeSet<[usize; 3]> = cells.keys().map(|(c, _)| *c).collect();
    let dims = match schema.dims {
        Some(d) => {
            if let Some(c) = voxels.iter().find(|c| (0..3).any(|k| c[k] >= d[k])) {
                return schema_err(format!("voxel ({}, {}, {}) outside dims {d:?}", c[0], c[1], c[2]));
            }
            d
        }
        None => {
            let mut d = [0; 3];
            for c in &voxels {
                for k in 0..3 {
                    d[k] = d[k].max(c[k] + 1);
                }
            }
            d
        }
    };
    let total: usize = dims.iter().product();
    let mut mask = vec![false; total];
    let flat = |c: [usize; 3]| c[0] + dims[0] * (c[1] + dims[1] * c[2]);
    for c in &voxels {
        mask[flat(*c)] = true;
    }
    let geometry = Geometry::new(dims, mask)?;

    // Masked order is flat order; sort voxels accordingly.
    let mut ordered: Vec<[usize; 3]> = voxels.into_iter().collect();
    ordered.sort_by_key(|c| flat(*c));
    let n = ordered.len();
    let mut values = vec![0.0; m * n];
    for (r, &rep) in reps.iter().enumerate() {
        let mut column_values = Vec::with_capacity(n);
        for c in &ordered {
            match cells.get(&(*c, rep)) {
                Some(&v) => column_values.push(v),
                None => {
                    return schema_err(format!(
                        "voxel ({}, {}, {}) has no row for replication {rep}",
                        c[0], c[1], c[2]
                    ))
                }
            }
        }
        if schema.value == ValueKind::Tstat {
            let (p, flagged) = t_to_p(&column_values, dofs[r]);
            if let Some(&i) = flagged.first() {
                let c = ordered[i];
                return schema_err(format!(
                    "voxel ({}, {}, {}) replication {rep}: t statistic is NaN",
                    c[0], c[1], c[2]
                ));
            }
            column_values = p;
        }
        values[r * n..(r + 1) * n].copy_from_slice(&column_values);
    }
    ReplicationSet::new(geometry, dofs, values)
}
