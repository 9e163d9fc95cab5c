//! `voxcert`: fit replicated p-value maps and emit certainty volumes.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use run::{CliError, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "voxcert", version, about = "Voxel-wise activation certainty from replicated fMRI maps")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Threads {
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "VOXCERT_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct FitOpts {
    /// Number of simplex starting points (1 to 9).
    #[arg(long, default_value_t = 9)]
    pub restarts: usize,
    #[arg(long = "tol", default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iter: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit (λ, δ) at every masked voxel of a p-value container.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        fit: FitOpts,
        #[command(flatten)]
        threads: Threads,
    },
    /// Thresholds, certainties, AUC and decisions from fitted maps.
    Certainty {
        /// The λ and δ containers, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        fits: Vec<PathBuf>,
        #[arg(long)]
        composite: PathBuf,
        /// `frontier` or `fdr:q`.
        #[arg(long = "tau-source", default_value = "frontier")]
        tau_source: String,
        /// Per-replication degrees of freedom; read from the λ container when absent.
        #[arg(long)]
        dof: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        threads: Threads,
    },
    /// Simulate, fit and score a scenario for several replication counts.
    Simulate {
        #[arg(long, default_value = "default")]
        scenario: String,
        /// Replication counts: a list such as `2,6,12` or a range `2..12`.
        #[arg(long = "M-range", visible_alias = "m-range")]
        m_range: String,
        #[arg(long = "N", visible_alias = "voxels")]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Report table (CSV).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        fit: FitOpts,
        #[command(flatten)]
        threads: Threads,
    },
    /// Pairwise percent overlap of decision maps.
    Overlap {
        #[arg(long, num_args = 2.., required = true)]
        maps: Vec<PathBuf>,
        /// Matrix (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a t-statistic container to upper-tail p-values.
    Convert {
        #[arg(long)]
        tstats: PathBuf,
        /// Degrees of freedom for every replication; the container's own when absent.
        #[arg(long)]
        dof: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split the replications into two seeded halves.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        /// The two output containers, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        out: Vec<PathBuf>,
    },
    /// Write a synthetic volume with known ground truth.
    Generate {
        #[arg(long, default_value = "default")]
        scenario: String,
        /// Grid size `nx,ny,nz`.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long = "M", visible_alias = "replications")]
        m: usize,
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        threads: Threads,
    },
    /// Per-slice delimited dump of a container for plotting.
    Dump {
        #[arg(long)]
        input: PathBuf,
        /// Replication (or value) index.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Only this z slice.
        #[arg(long)]
        slice: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Import `x,y,z,rep,pvalue` or `x,y,z,rep,tstat` rows.
    Import {
        #[arg(long)]
        csv: PathBuf,
        /// `pvalue` or `tstat`.
        #[arg(long, default_value = "pvalue")]
        value: String,
        /// Degrees of freedom, one value or one per replication.
        #[arg(long, value_delimiter = ',', conflicts_with = "dof_file")]
        dof: Vec<f64>,
        #[arg(long = "dof-file")]
        dof_file: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cmd: Command) -> run::CliResult<()> {
    use commands::*;
    match cmd {
        Command::Fit { input, out, fit, threads } => fit_cmd(&input, &out, fit, threads),
        Command::Certainty { fits, composite, tau_source, dof, out, threads } => {
            certainty_cmd(&fits, &composite, &tau_source, dof, &out, threads)
        }
        Command::Simulate { scenario, m_range, n, seed, out, fit, threads } => {
            simulate_cmd(&scenario, &m_range, n, seed, &out, fit, threads)
        }
        Command::Overlap { maps, out } => overlap_cmd(&maps, &out),
        Command::Convert { tstats, dof, out } => convert_cmd(&tstats, dof, &out),
        Command::Split { input, seed, out } => split_cmd(&input, seed, &out),
        Command::Generate { scenario, dims, m, seed, out, threads } => {
            generate_cmd(&scenario, &dims, m, seed, &out, threads)
        }
        Command::Dump { input, index, slice, out } => dump_cmd(&input, index, slice, &out),
        Command::Import { csv, value, dof, dof_file, dims, out } => {
            import_cmd(&csv, &value, &dof, dof_file.as_deref(), dims.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("voxcert: {e}");
            ExitCode::from(CliError::code(&e) as u8)
        }
    }
}
