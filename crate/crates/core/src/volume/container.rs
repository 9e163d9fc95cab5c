//! The on-disk volume container.
//!
//! A text header of `key=value` lines closed by a line `end`, followed by the
//! payload: `N_masked × M` little-endian `f64`, replication-major, each
//! replication in masked `x`-fastest order.
//!
//! ```text
//! FMRICERT
//! version=1
//! kind=pvalue
//! dims=4 4 1
//! m=3
//! dofs=122 122 122
//! endian=little
//! mask=0 16
//! end
//! ```
//!
//! `mask` is a run-length encoding of the grid in flat order, alternating
//! unmasked and masked runs and starting with an unmasked run (possibly 0).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Geometry, ReplicationSet};
use crate::error::{shape, Error, Result};
use crate::special::Dof;

pub const MAGIC: &str = "FMRICERT";
pub const VERSION: u32 = 1;

/// What the payload values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Pvalue,
    Tstat,
    Lambda,
    Delta,
    Tau,
    RhoPlus,
    RhoMinus,
    Auc,
    Decision,
}

impl ValueKind {
    pub const ALL: [ValueKind; 9] = [
        ValueKind::Pvalue,
        ValueKind::Tstat,
        ValueKind::Lambda,
        ValueKind::Delta,
        ValueKind::Tau,
        ValueKind::RhoPlus,
        ValueKind::RhoMinus,
        ValueKind::Auc,
        ValueKind::Decision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Pvalue => "pvalue",
            ValueKind::Tstat => "tstat",
            ValueKind::Lambda => "lambda",
            ValueKind::Delta => "delta",
            ValueKind::Tau => "tau",
            ValueKind::RhoPlus => "rho_plus",
            ValueKind::RhoMinus => "rho_minus",
            ValueKind::Auc => "auc",
            ValueKind::Decision => "decision",
        }
    }
}

impl std::fmt::Display for ValueKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ValueKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown value kind '{s}'"))
    }
}

/// A masked volume with `m` values per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeContainer {
    pub geometry: Geometry,
    pub kind: ValueKind,
    pub m: usize,
    /// One per replication, or empty for derived maps.
    pub dofs: Vec<Dof>,
    /// `m × N_masked` values, replication-major.
    pub values: Vec<f64>,
}

impl VolumeContainer {
    pub fn new(
        geometry: Geometry,
        kind: ValueKind,
        m: usize,
        dofs: Vec<Dof>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let c = Self {
            geometry,
            kind,
            m,
            dofs,
            values,
        };
        c.validate()?;
        Ok(c)
    }

    /// A single-valued map such as `lambda` or `decision`.
    pub fn map(geometry: Geometry, kind: ValueKind, values: Vec<f64>) -> Result<Self> {
        Self::new(geometry, kind, 1, Vec::new(), values)
    }

    pub fn from_replications(set: &ReplicationSet) -> Self {
        Self {
            geometry: set.geometry().clone(),
            kind: ValueKind::Pvalue,
            m: set.m(),
            dofs: set.dofs().to_vec(),
            values: set.pvalues().to_vec(),
        }
    }

    /// Interprets a `pvalue` container as a replication set.
    pub fn to_replications(&self) -> Result<ReplicationSet> {
        if self.kind != ValueKind::Pvalue {
            return shape(format!("expected a pvalue container, found {}", self.kind));
        }
        if self.dofs.len() != self.m {
            return shape("pvalue container needs one dof per replication");
        }
        ReplicationSet::new(self.geometry.clone(), self.dofs.clone(), self.values.clone())
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return shape("container must hold at least one value per voxel");
        }
        if !self.dofs.is_empty() && self.dofs.len() != self.m {
            return shape(format!("{} dofs for m = {}", self.dofs.len(), self.m));
        }
        let expected = self.m * self.geometry.n_masked();
        if self.values.len() != expected {
            return shape(format!(
                "{} values, expected {expected} ({} masked voxels × m = {})",
                self.values.len(),
                self.geometry.n_masked(),
                self.m
            ));
        }
        Ok(())
    }

    /// Replication `r` over the masked voxels.
    pub fn slice(&self, r: usize) -> &[f64] {
        let n = self.geometry.n_masked();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn header(&self) -> String {
        let mut h = String::new();
        let [nx, ny, nz] = self.geometry.dims();
        let _ = writeln!(h, "{MAGIC}");
        let _ = writeln!(h, "version={VERSION}");
        let _ = writeln!(h, "kind={}", self.kind);
        let _ = writeln!(h, "dims={nx} {ny} {nz}");
        let _ = writeln!(h, "m={}", self.m);
        let dofs: Vec<String> = self.dofs.iter().map(|d| format!("{}", d.get())).collect();
        let _ = writeln!(h, "dofs={}", dofs.join(" "));
        let _ = writeln!(h, "endian=little");
        let runs: Vec<String> = mask_runs(self.geometry.mask()).iter().map(|r| r.to_string()).collect();
        let _ = writeln!(h, "mask={}", runs.join(" "));
        let _ = writeln!(h, "end");
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = self.header();
        let mut out = Vec::with_capacity(header.len() + 8 * self.values.len());
        out.extend_from_slice(header.as_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a container; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        Parser { bytes, path, pos: 0 }.parse()
    }
}

fn mask_runs(mask: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0;
    for &m in mask {
        if m == current {
            len += 1;
        } else {
            runs.push(len);
            current = m;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

struct Parser<'a> {
    bytes: &'a [u8],
    path: &'a Path,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Header {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            reason: reason.into(),
        }
    }

    /// Next header line and its starting offset.
    fn line(&mut self) -> Result<(usize, &'a str)> {
        let start = self.pos;
        let bytes: &'a [u8] = self.bytes;
        let rest = &bytes[start..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| self.err(start, "unterminated header line"))?;
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| self.err(start, "header is not UTF-8"))?;
        self.pos = start + nl + 1;
        Ok((start, line))
    }

    fn field(&mut self, key: &str) -> Result<(usize, String)> {
        let (off, line) = self.line()?;
        match line.split_once('=') {
            Some((k, v)) if k == key => Ok((off, v.to_string())),
            _ => Err(self.err(off, format!("expected '{key}=...', found '{line}'"))),
        }
    }

    fn parse(mut self) -> Result<VolumeContainer> {
        let (off, magic) = self.line()?;
        if magic != MAGIC {
            return Err(self.err(off, format!("bad magic '{magic}', expected '{MAGIC}'")));
        }
        let (off, v) = self.field("version")?;
        if v.parse::<u32>().ok() != Some(VERSION) {
            return Err(self.err(off, format!("unsupported version '{v}', expected {VERSION}")));
        }
        let (off, v) = self.field("kind")?;
        let kind: ValueKind = v.parse().map_err(|e: String| self.err(off, e))?;

        let (off, v) = self.field("dims")?;
        let dims: Vec<usize> = v
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err(off, format!("bad dims '{v}'")))?;
        let dims: [usize; 3] = dims
            .try_into()
            .map_err(|_| self.err(off, "dims must have three entries"))?;

        let (off, v) = self.field("m")?;
        let m: usize = v.parse().map_err(|_| self.err(off, format!("bad m '{v}'")))?;
        if m == 0 {
            return Err(self.err(off, "m must be positive"));
        }

        let (off, v) = self.field("dofs")?;
        let dofs: Vec<Dof> = v
            .split_whitespace()
            .map(|s| s.parse::<f64>().ok().and_then(|x| Dof::new(x).ok()))
            .collect::<Option<_>>()
            .ok_or_else(|| self.err(off, format!("bad dofs '{v}'")))?;
        if !dofs.is_empty() && dofs.len() != m {
            return Err(self.err(off, format!("{} dofs for m = {m}", dofs.len())));
        }

        let (off, v) = self.field("endian")?;
        if v != "little" {
            return Err(self.err(off, format!("unsupported endianness '{v}'")));
        }

        let (off, v) = self.field("mask")?;
        let runs: Vec<usize> = v
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err(off, format!("bad mask encoding '{v}'")))?;
        let total = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let total = match total {
            Some(t) if t > 0 => t,
            _ => return Err(self.err(off, format!("invalid dims {dims:?}"))),
        };
        let covered = runs.iter().try_fold(0usize, |a, &r| a.checked_add(r));
        if covered != Some(total) {
            return Err(self.err(
                off,
                format!("mask runs cover {covered:?} voxels, grid has {total}"),
            ));
        }
        let mut mask = Vec::with_capacity(total);
        for (i, &r) in runs.iter().enumerate() {
            mask.extend(std::iter::repeat_n(i % 2 == 1, r));
        }
        let geometry = Geometry::new(dims, mask).map_err(|e| self.err(off, e.to_string()))?;

        let (off, end) = self.line()?;
        if end != "end" {
            return Err(self.err(off, format!("expected 'end', found '{end}'")));
        }

        let count = m * geometry.n_masked();
        let expected = 8 * count;
        let payload = &self.bytes[self.pos..];
        if payload.len() < expected {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                offset: self.bytes.len() as u64,
                expected: expected as u64,
                actual: payload.len() as u64,
            });
        }
        if payload.len() > expected {
            return Err(Error::Trailing {
                path: self.path.to_path_buf(),
                offset: (self.pos + expected) as u64,
                extra: (payload.len() - expected) as u64,
            });
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        VolumeContainer::new(geometry, kind, m, dofs, values)
    }
}

pub fn read_container(path: impl AsRef<Path>) -> Result<VolumeContainer> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    VolumeContainer::from_bytes(&bytes, path)
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial container.
pub fn write_container(path: impl AsRef<Path>, c: &VolumeContainer) -> Result<()> {
    let path = path.as_ref();
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&c.to_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}
