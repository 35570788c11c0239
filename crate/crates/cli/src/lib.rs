//! `itoexp` command line: coefficient tables, residuals, sampling, error
//! analysis, Monte Carlo validation, rate probes and the SDE demo.

mod commands;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use itoexp::BasisKind;

pub use output::data_body;

/// Environment variable consulted for the master seed when `--seed` is absent.
pub const SEED_ENV: &str = "ITOEXP_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser, Debug)]
#[command(name = "itoexp", version, about = "Fourier expansions of iterated Ito stochastic integrals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write to this file instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Master seed; falls back to $ITOEXP_SEED, then a fixed default
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Coefficient table, with exact rationals when available
    Coeffs(ProblemArgs),
    /// Parseval residual and the k!-scaled mean-square bound
    Residual(ProblemArgs),
    /// Sampled values of the truncated expansion
    Sample {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Number of draws
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Exact mean-square error, bounds and moment bounds
    Mse(ProblemArgs),
    /// Monte Carlo mean-square error against the prediction
    Validate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Fine grid size of the oracle paths
        #[arg(long = "N", default_value_t = 4096)]
        n: usize,
    },
    /// Decay rate of the residual in p
    Rate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        p_values: Vec<usize>,
    },
    /// Strong convergence of a Milstein scheme driven by the expansion
    SdeDemo {
        /// Step counts on [0, 1], powers of two, increasing
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        steps: Vec<usize>,
        /// Fixed truncation; omitted means selected per step size
        #[arg(long)]
        q: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// legendre or trig
    #[arg(long, default_value = "legendre")]
    pub basis: BasisKind,

    #[arg(long = "t", default_value_t = 0.0, allow_negative_numbers = true)]
    pub t: f64,

    #[arg(long = "T", default_value_t = 1.0, allow_negative_numbers = true)]
    pub big_t: f64,

    /// Multiplicity; defaults to the number of components
    #[arg(long)]
    pub k: Option<usize>,

    /// Truncation
    #[arg(long, conflicts_with = "tol")]
    pub p: Option<usize>,

    /// Select the smallest truncation meeting this error tolerance
    #[arg(long)]
    pub tol: Option<f64>,

    /// Component indices i_1,...,i_k (0 = time); defaults to 1,...,k
    #[arg(long, value_delimiter = ',')]
    pub components: Option<Vec<usize>>,

    /// Weight per level: `1` or comma-separated monomial coefficients; repeat k times
    #[arg(long = "weight", allow_hyphen_values = true)]
    pub weights: Vec<String>,

    /// Load the coefficient table from a JSON file written by `coeffs`
    #[arg(long)]
    pub table: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 ok, 1 usage, 2 capacity or validation failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match commands::execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e)
        }
    }
}
