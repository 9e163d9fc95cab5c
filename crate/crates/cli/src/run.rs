//! Output bookkeeping, run manifests and the exit-code contract.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use voxcert::volume::{write_container, VolumeContainer};

/// Exit code 1.
pub const EXIT_USAGE: i32 = 1;
/// Exit code 2.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code 3.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl From<voxcert::Error> for CliError {
    fn from(e: voxcert::Error) -> Self {
        match e {
            voxcert::Error::Numerical(_) => CliError::Numerical(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn validation<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

/// Everything needed to rerun a command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub arguments: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub version: String,
    pub parallel_build: bool,
    pub wall_time_seconds: f64,
    pub results: Value,
}

/// Tracks what a command wrote so a failed run leaves nothing behind.
pub struct Run {
    subcommand: &'static str,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    created_dirs: Vec<PathBuf>,
    pub config: Value,
    pub seed: Option<u64>,
    pub results: Value,
    pub threads: usize,
}

impl Run {
    pub fn new(subcommand: &'static str, threads: usize) -> Self {
        Self {
            subcommand,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            created_dirs: Vec::new(),
            config: Value::Null,
            seed: None,
            results: Value::Null,
            threads,
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        if !path.is_file() {
            return validation(format!("{}: no such input file", path.display()));
        }
        self.inputs.push(path.to_path_buf());
        Ok(())
    }

    /// Creates `dir` if needed and remembers it for cleanup.
    pub fn out_dir(&mut self, dir: &Path) -> CliResult<()> {
        let mut missing = Vec::new();
        let mut d = dir;
        while !d.as_os_str().is_empty() && !d.exists() {
            missing.push(d.to_path_buf());
            match d.parent() {
                Some(p) => d = p,
                None => break,
            }
        }
        fs::create_dir_all(dir)?;
        self.created_dirs.extend(missing);
        Ok(())
    }

    fn claim(&mut self, path: &Path) -> CliResult<()> {
        if let Ok(target) = path.canonicalize() {
            for input in &self.inputs {
                if input.canonicalize().ok().as_deref() == Some(target.as_path()) {
                    return validation(format!("{}: output would overwrite an input", path.display()));
                }
            }
        }
        if let Some(parent) = path.parent() {
            self.out_dir(parent)?;
        }
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_container(&mut self, path: &Path, c: &VolumeContainer) -> CliResult<()> {
        self.claim(path)?;
        write_container(path, c)?;
        Ok(())
    }

    pub fn write_text(&mut self, path: &Path, text: &str) -> CliResult<()> {
        self.claim(path)?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> CliResult<()> {
        self.claim(path)?;
        let outputs = self.outputs[..self.outputs.len() - 1].to_vec();
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            arguments: std::env::args().collect(),
            inputs: self.inputs.clone(),
            outputs,
            config: self.config.clone(),
            seed: self.seed,
            threads: self.threads,
            version: env!("CARGO_PKG_VERSION").to_string(),
            parallel_build: voxcert::Execution::parallel_available(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            results: self.results.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(path, text + "\n")?;
        self.outputs.clear();
        self.created_dirs.clear();
        Ok(())
    }
}

impl Drop for Run {
    /// Anything still registered here belongs to a run that did not finish.
    fn drop(&mut self) {
        for p in &self.outputs {
            let _ = fs::remove_file(p);
        }
        for d in self.created_dirs.iter() {
            let _ = fs::remove_dir(d);
        }
    }
}

/// `<path>.manifest.json` for commands whose output is a single file.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
