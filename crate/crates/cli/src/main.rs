mod commands;
mod config;
mod error;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

/// Constrained restricted invertibility: column selection, certified
/// selection-value estimates, bound constants and Monte Carlo audits.
#[derive(Debug, Parser)]
#[command(name = "cri", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample an n x p matrix with columns uniform on the unit sphere.
    Gen(GenArgs),
    /// Greedy outer set and well-conditioned extraction for one direction.
    Select(SelectArgs),
    /// Certified estimate of the selection value over an epsilon-net.
    Gamma(GammaArgs),
    /// Constants, thresholds and hypothesis ledger of the selection-value bound.
    Constants(ConstantsArgs),
    /// Run a Monte Carlo audit and write its report and trial table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl OutputFormat {
    fn name(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
            OutputFormat::Text => "text",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl From<OutputFormat> for serde_json::Value {
    fn from(f: OutputFormat) -> Self {
        f.name().into()
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    p: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SelectionFlags {
    #[arg(long)]
    s: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "max-attempts")]
    max_attempts: Option<u64>,
    #[arg(long = "brute-force-limit")]
    brute_force_limit: Option<u64>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Matrix file written by `cri gen`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Direction file (comma-separated values, normalized on load).
    #[arg(long, conflicts_with = "v_random")]
    v: Option<PathBuf>,
    /// Draw the direction uniformly from the seed.
    #[arg(long = "v-random")]
    v_random: bool,
    /// Also compute the exact infimum by enumeration.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    selection: SelectionFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct GammaArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long = "net-eps")]
    net_eps: Option<f64>,
    #[arg(long)]
    probes: Option<u64>,
    #[command(flatten)]
    selection: SelectionFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ConstantsArgs {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    s: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "c-kappa")]
    c_kappa: Option<f64>,
    /// Sub-Gaussian constant.
    #[arg(long)]
    c: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentName {
    OrderStat,
    Coherence,
    Norm,
    Decoupling,
    Theorem,
    Chernoff,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    s: Option<u64>,
    /// Order index (1-based).
    #[arg(long)]
    r: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "kappa-s")]
    kappa_s: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "net-eps")]
    net_eps: Option<f64>,
    #[arg(long)]
    probes: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long = "r-grid", value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,
    /// Binomials as `count:probability`, comma-separated.
    #[arg(long, value_delimiter = ',')]
    binomials: Option<Vec<String>>,
    #[arg(long = "eps-grid", value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CRI_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("CRI_THREADS='{raw}' is not a non-negative integer")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Select(a) => commands::select(a),
        Command::Gamma(a) => commands::gamma(a),
        Command::Constants(a) => commands::constants(a),
        Command::Experiment(a) => commands::experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
