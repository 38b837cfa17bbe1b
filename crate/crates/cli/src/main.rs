//! Command-line driver: bound evaluation, soundness sweeps, and thin
//! wrappers over the library's Pickands, prime-process, CLT-error,
//! Monte-Carlo, and oracle entry points.
//!
//! Exit codes: 0 success, 1 usage/IO/parse errors, 2 validation failure
//! (with the validation report embedded in the emitted JSON), 3 soundness
//! violation in a sweep.

mod commands;
mod manifest;

use clap::{ArgAction, Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "suptail",
    version,
    about = "Lower bounds for Gaussian-process supremum tails, with verification"
)]
pub struct Cli {
    /// Base seed for all randomised work.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,

    /// Output format where a choice exists.
    #[arg(long, global = true, value_parser = ["json", "csv"], default_value = "json")]
    pub format: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Evaluate the conditioning/comparison lower bound from a config file.
    Bound {
        /// JSON file with the bound parameters and a "matrix" path.
        #[arg(long)]
        config: std::path::PathBuf,
    },
    /// Run a soundness sweep from a suite spec; exits 3 on any violation.
    Sweep {
        /// JSON suite spec listing instance families.
        #[arg(long)]
        suite: std::path::PathBuf,
        /// Test hook: corrupt every bound by +0.5 to exercise the failure
        /// path.
        #[arg(long, hide = true, action = ArgAction::SetTrue)]
        corrupt_bound: bool,
    },
    /// Pickands-constant lower-bound surrogate over an (alpha, u) grid.
    Pickands {
        /// Comma-separated alpha values in (0, 2].
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        /// Comma-separated levels u.
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        /// Grid-density parameter b in [1, 10].
        #[arg(long, default_value_t = std::f64::consts::E / 2.0)]
        b: f64,
        /// Window parameter a > 0.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Comparison parameter delta (defaults to alpha).
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Prime-indexed process: covariances, bound instance, decoupling, and
    /// the Monte-Carlo experiment.
    Primeproc {
        #[arg(long)]
        x: f64,
        /// Small-prime cutoff, or "auto".
        #[arg(long, default_value = "auto")]
        y: String,
        /// Grid spacing multiplier, or "auto".
        #[arg(long = "E", default_value = "auto")]
        e: String,
        /// Grid-length constant K.
        #[arg(long = "K")]
        k: Option<f64>,
        /// Number of blocks minus one.
        #[arg(long = "B")]
        b: Option<usize>,
        /// Which block the single-block reports use.
        #[arg(long, default_value_t = 0)]
        block: usize,
        /// Monte-Carlo sample count for the experiment.
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
        /// Embed the exact/approx matrices in the report.
        #[arg(long, action = ArgAction::SetTrue)]
        include_matrices: bool,
    },
    /// Exchangeable-pair CLT error bound for a coefficient array.
    CltError {
        /// JSON file {"n":..,"T":..,"alpha":[[..]]} (row-major over i).
        #[arg(long)]
        coeffs: std::path::PathBuf,
        /// Lower threshold (the smoothed indicator is 1 below this).
        #[arg(long)]
        a: f64,
        /// Upper threshold (0 above this).
        #[arg(long)]
        b: f64,
        /// Triple-sum mode.
        #[arg(long, value_parser = ["exact", "max"], default_value = "exact")]
        mode: String,
        /// Also run the twin Monte-Carlo transfer check with this many
        /// samples per side.
        #[arg(long)]
        transfer_samples: Option<u64>,
    },
    /// Monte-Carlo supremum tail probability for a stored matrix.
    Mc {
        #[arg(long)]
        matrix: std::path::PathBuf,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// Exact orthant probability (n <= 3) for a stored matrix.
    Oracle {
        #[arg(long)]
        matrix: std::path::PathBuf,
        /// Comma-separated thresholds, one per coordinate.
        #[arg(long, value_delimiter = ',', required = true)]
        thresholds: Vec<f64>,
    },
}

/// Failure modes mapped to the exit-code contract.
pub enum Failure {
    /// Exit 1: bad flags, missing or malformed files.
    Usage(String),
    /// Exit 2: hypothesis validation failed (report already emitted).
    Validation(String),
    /// Exit 3: a sweep instance violated soundness.
    Soundness(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Soundness(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Soundness(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let kind = e.kind();
            if kind == ErrorKind::DisplayHelp || kind == ErrorKind::DisplayVersion {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("failed to configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
