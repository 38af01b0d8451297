//! Batch command-line front end wiring ingestion, projection, estimation,
//! biomarkers and validation.
//!
//! Exit codes: 0 ok, 2 usage, 3 input validation, 4 numerical failure,
//! 5 I/O. Output files are written to a temporary sibling and renamed, so a
//! failing command never leaves partial output. All data outputs are
//! byte-deterministic under a fixed seed; wall-clock timings go to stderr.

mod commands;
mod config;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use config::ConfigFile;

pub(crate) enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => e.exit_code(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "riccprec",
    version,
    about = "Low-rank Riccati-regularized precision matrices and network biomarkers"
)]
struct Cli {
    /// key=value config file with one [section] per subcommand; flags
    /// override file values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized compression of the sample dimension
    Project(ProjectArgs),
    /// Estimate a factored precision matrix
    Estimate(EstimateArgs),
    /// Gaussian entropy of a node subset
    Tsee(TseeArgs),
    /// Partial correlations from a precision file
    Partials(PartialsArgs),
    /// Shared-basis estimation across several inputs
    Jsvd(JsvdArgs),
    /// Split-sample NLL sweep over a (dimension, rho, alpha, method) grid
    Validate(ValidateArgs),
    /// Intraclass correlation from a ratings table or partial matrices
    Icc(IccArgs),
    /// Mahalanobis distances between paired maps
    Distance(DistanceArgs),
    /// Materialize a factored precision as a dense matrix (capped)
    Densify(DensifyArgs),
}

#[derive(Args)]
struct ProjectArgs {
    /// Input matrices (csv or raw64, by extension)
    #[arg(value_name = "INPUT")]
    inputs: Vec<PathBuf>,
    /// Target sample dimension
    #[arg(long)]
    t: Option<usize>,
    /// Power iterations
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (single input or --shared-basis)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output directory for multiple inputs
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Output encoding: csv or raw64
    #[arg(long)]
    format: Option<String>,
    /// Concatenate all inputs and project them with one basis
    #[arg(long)]
    shared_basis: bool,
    /// Sidecar path for the retained-energy line (single output only)
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Drop this many initial samples from every input
    #[arg(long)]
    trim: Option<usize>,
    /// Do not normalize rows before projecting
    #[arg(long)]
    skip_normalize: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    rho: Option<f64>,
    /// identity | diagonal:FILE | roi:FILE:ALPHA | tikhonov
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Drop this many initial samples
    #[arg(long)]
    trim: Option<usize>,
    /// Input rows are already normalized; do not renormalize
    #[arg(long)]
    skip_normalize: bool,
    /// Treat the input as a compression of a recording with this many
    /// samples (skips normalization)
    #[arg(long)]
    samples: Option<usize>,
    /// Project to this sample dimension before estimating
    #[arg(long)]
    project_t: Option<usize>,
    #[arg(long)]
    project_q: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TseeArgs {
    #[arg(long)]
    precision: Option<PathBuf>,
    /// Node subset file: one-based indices, one per line
    #[arg(long)]
    network: Option<PathBuf>,
    /// Cross-check: fail unless the penalty on the network equals this
    /// alpha
    #[arg(long)]
    alpha: Option<f64>,
    /// Densify and use the dense eigensolve instead of the fast path
    #[arg(long)]
    direct: bool,
    /// Densify cap for --direct
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PartialsArgs {
    #[arg(long)]
    precision: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args)]
struct JsvdArgs {
    /// Per-subject input matrices
    #[arg(value_name = "INPUT")]
    inputs: Vec<PathBuf>,
    /// Shared basis size
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    output_model: Option<PathBuf>,
    /// Directory for the per-subject precision files
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Optional per-subject compression before the joint decomposition
    #[arg(long)]
    project_t: Option<usize>,
    #[arg(long)]
    project_q: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight by scan length instead of equally per subject
    #[arg(long)]
    weight_by_scans: bool,
    #[arg(long)]
    trim: Option<usize>,
    #[arg(long)]
    skip_normalize: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Cohort manifest: subject_id,path lines
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated dimension axis, e.g. 5,10,25,full
    #[arg(long, value_delimiter = ',')]
    dimensions: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    rhos: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<String>,
    /// riccati and/or tikhonov
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Network file; required when an alpha other than 1 appears
    #[arg(long)]
    network: Option<PathBuf>,
    /// Power iterations for the dimension-axis projections
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    output_csv: Option<PathBuf>,
    #[arg(long)]
    output_json: Option<PathBuf>,
    /// Cap on worker threads
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct IccArgs {
    /// Ratings table (subjects x repetitions, csv)
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Manifest of per-scan partial-correlation matrices for edge ICC
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    precision: Option<PathBuf>,
    /// Matrix whose columns are the first maps
    #[arg(long)]
    maps_a: Option<PathBuf>,
    /// Matrix whose columns are the second maps
    #[arg(long)]
    maps_b: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DensifyArgs {
    #[arg(long)]
    precision: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    cap: Option<usize>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 0 for --help/--version, 2 for usage errors
            let _ = e.print();
            return e.exit_code();
        }
    };
    let config = match &cli.config {
        None => ConfigFile::default(),
        Some(path) => match ConfigFile::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("riccprec: {e}");
                return e.exit_code();
            }
        },
    };
    let outcome = match cli.command {
        Command::Project(args) => commands::project(args, &config),
        Command::Estimate(args) => commands::estimate(args, &config),
        Command::Tsee(args) => commands::tsee(args, &config),
        Command::Partials(args) => commands::partials(args, &config),
        Command::Jsvd(args) => commands::jsvd(args, &config),
        Command::Validate(args) => commands::validate(args, &config),
        Command::Icc(args) => commands::icc(args, &config),
        Command::Distance(args) => commands::distance(args, &config),
        Command::Densify(args) => commands::densify(args, &config),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("riccprec: {e}");
            e.exit_code()
        }
    }
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes through a temporary sibling and renames, so failures leave no
/// partial output behind.
pub(crate) fn atomic_write(
    path: &Path,
    write_fn: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("bad output path {}", path.display())))?;
    let tmp_name = format!(
        ".{}.tmp.{}.{}",
        name.to_string_lossy(),
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    );
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => PathBuf::from(&tmp_name),
    };
    let result = (|| -> Result<()> {
        let file = fs::File::create(&tmp_path)?;
        let mut writer = std::io::BufWriter::new(file);
        write_fn(&mut writer)?;
        writer.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            fs::rename(&tmp_path, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp_path);
            Err(e)
        }
    }
}
