//! The `khoeffding` command line.
//!
//! Exit codes: 0 success, 2 input error, 3 enumeration size guard, 4 verification failure.

mod commands;
pub mod scenario;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use scenario::{Side, TRange};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SIZE_GUARD: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "khoeffding",
    version,
    about = "Order-k Hoeffding bounds and Chernoff tail certificates"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and Monte Carlo (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Largest bound order considered.
    #[arg(long, global = true)]
    pub k_max: Option<u32>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a single-variable MGF bound.
    Bound(BoundArgs),
    /// Tail certificates for a scenario over one or more thresholds.
    Tail(TailArgs),
    /// Optimal orders at a threshold plus per-variable crossover tables.
    Select(SelectArgs),
    /// Check bounds against exact MGFs and Monte Carlo.
    Verify(VerifyArgs),
    /// Log bounds of fixed order groups over a threshold range, with crossovers.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long)]
    pub m2: Option<f64>,
    #[arg(long)]
    pub m4: Option<f64>,
    /// Declare E[X^3] = 0.
    #[arg(long)]
    pub odd_zero: bool,
    /// classic, hertz, order-k, order2-moment, order4-moment, symmetric-order4.
    #[arg(long, default_value = "hertz")]
    pub family: String,
    /// Order for `--family order-k`.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub s: f64,
    /// Tabulate every applicable family, tightest first.
    #[arg(long)]
    pub compare: bool,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    pub scenario: PathBuf,
    /// Threshold (repeatable).
    #[arg(long = "t")]
    pub t: Vec<f64>,
    /// START:END:POINTS
    #[arg(long)]
    pub t_range: Option<TRange>,
    #[arg(long, value_enum)]
    pub side: Option<Side>,
    /// Use the continuous relaxation for `auto` choices.
    #[arg(long)]
    pub relaxed: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    pub scenario: PathBuf,
    #[arg(long = "t")]
    pub t: Option<f64>,
    #[arg(long)]
    pub relaxed: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub scenario: Option<PathBuf>,
    /// Check this many random pmfs on the support given by --a/--b.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, allow_negative_numbers = true, default_value_t = -5.0)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub b: f64,
    /// Random pmfs per variable when verifying a scenario.
    #[arg(long, default_value_t = 1000)]
    pub pmfs: usize,
    /// Multiply every rate by this factor (a deliberately broken bound for testing the gate).
    #[arg(long, default_value_t = 1.0)]
    pub poison_rate: f64,
    #[arg(long = "t")]
    pub t: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    /// START:END:POINTS
    #[arg(long)]
    pub t_range: Option<TRange>,
    /// Comma-separated orders, one per variable (repeatable).
    #[arg(long = "group")]
    pub groups: Vec<String>,
}

/// Errors surfaced by commands, each mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    SizeGuard(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::SizeGuard(_) => EXIT_SIZE_GUARD,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::SizeGuard(m) | CliError::Verification(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SizeGuard { candidates, limit } => CliError::SizeGuard(format!(
                "search space of {candidates} assignments exceeds the limit of {limit}; rerun with --relaxed"
            )),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot size thread pool: {e}");
            return EXIT_INPUT;
        }
    }
    let mut out = String::new();
    let result = commands::run(&cli, &mut out);
    // partial output (e.g. a verification report) is still written
    if let Err(e) = emit(&cli.global, &out) {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn emit(global: &GlobalOpts, text: &str) -> std::io::Result<()> {
    match &global.out {
        Some(path) => std::fs::write(path, text),
        None => {
            use std::io::Write;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()
        }
    }
}

/// Fixed 12-significant-digit scientific notation used in every CSV field.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}
