mod commands;
mod families;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rigidkron::rigidity::DEFAULT_WORK_CAP;
use rigidkron::sparse::set_dimension_cap;

/// Sparse low-depth circuits for Kronecker powers from rigidity decompositions.
#[derive(Parser, Debug)]
#[command(name = "rigidkron", version)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Largest matrix side that may be allocated.
    #[arg(long, global = true)]
    pub max_dim: Option<usize>,
    /// Largest brute-force search size.
    #[arg(long, global = true, default_value_t = DEFAULT_WORK_CAP)]
    pub work_cap: u128,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a circuit and print a summary line.
    Synth(SynthArgs),
    /// Check a circuit file against a target family.
    Verify(VerifyArgs),
    /// Exhaustive rigidity search over a prime field.
    Rigidity(RigidityArgs),
    /// Batch sums of f(s OR t) or f(s AND t) over a point set.
    Batch(BatchArgs),
    /// Sparsity left after removing the light rows and columns of R_n.
    DisjointStats(DisjointArgs),
    /// Sweep sizes and depths, one CSV row per cell.
    Bench(BenchArgs),
    /// Operation counts of Kronecker products evaluated by matrix products.
    Mmcost(MmcostArgs),
    /// Write a target matrix in the matrix text format.
    Export(ExportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct TargetArgs {
    /// hadamard, disjointness, kron2, vf or dft.
    #[arg(long)]
    pub family: String,
    /// Number of Kronecker slots (the size N for dft).
    #[arg(long)]
    pub n: Option<usize>,
    /// Base matrix file for kron2.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Truth table file for vf.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Field modulus; 0 selects the rationals.
    #[arg(long)]
    pub field: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// auto, h2, h3cube, h4 or js:M.
    #[arg(long, default_value = "auto")]
    pub base: String,
    /// Circuit output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Check with this many random vectors instead of row by row.
    #[arg(long)]
    pub probe: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RigidityArgs {
    /// Matrix file; otherwise the target comes from --family and --n.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Target family when no matrix file is given.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rank: usize,
    #[arg(long)]
    pub max_changes: usize,
    #[arg(long)]
    pub field: Option<u64>,
    /// Witness output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BatchArgs {
    /// Truth table file.
    #[arg(long = "f")]
    pub table: PathBuf,
    /// Points file, one bitstring per line.
    #[arg(long)]
    pub points: PathBuf,
    /// or / and.
    #[arg(long, default_value = "or")]
    pub convention: String,
    #[arg(long)]
    pub field: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DisjointArgs {
    #[arg(long)]
    pub n: usize,
    /// Weight threshold.
    #[arg(long, conflicts_with = "a")]
    pub k: Option<usize>,
    /// Threshold fraction, k = floor(a n).
    #[arg(long)]
    pub a: Option<String>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub family: String,
    /// Sizes as `start:stop:step` or a comma list.
    #[arg(long)]
    pub n: String,
    /// Comma-separated depths.
    #[arg(long, default_value = "2")]
    pub depth: String,
    #[arg(long, default_value = "auto")]
    pub base: String,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<u64>,
}

#[derive(Args, Debug)]
pub struct MmcostArgs {
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long)]
    pub n: usize,
    /// Comma-separated round counts.
    #[arg(long)]
    pub k: String,
    /// naive, strassen or both.
    #[arg(long, default_value = "both")]
    pub backend: String,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(cap) = cli.max_dim {
        set_dimension_cap(cap);
    }
    let workers = cli.workers;
    let result = rigidkron::par::with_workers(workers, || commands::run(&cli));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
