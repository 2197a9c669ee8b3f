use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dissicert", version, about = "Dissipativity certificates from input-output data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify dissipativity of the system that generated a trajectory.
    Certify(CertifyArgs),
    /// Report the Hankel rank profile and complexity estimate of a trajectory.
    Analyze(AnalyzeArgs),
    /// Write a trajectory CSV driven by i.i.d. uniform inputs.
    Simulate(SimulateArgs),
    /// Check dissipativity of a known state-space model.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupplyChoice {
    Passivity,
    #[value(name = "l2gain")]
    L2Gain,
    Custom,
}

#[derive(Debug, Args)]
pub struct SupplyArgs {
    /// Supply rate kind; defaults to `custom` when only --phi is given.
    #[arg(long, value_enum)]
    pub supply: Option<SupplyChoice>,
    /// Gain bound for the l2gain supply.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// JSON file {"m", "p", "phi"} with a custom supply coefficient matrix.
    #[arg(long)]
    pub phi: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Trajectory CSV, one sample per row: inputs then outputs.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub p: usize,
    /// Upper bound L on the lag of the data-generating system.
    #[arg(long = "lag-bound")]
    pub lag_bound: usize,
    /// Relative tolerance for numerical rank decisions.
    #[arg(long = "rank-tol", default_value_t = 1e-10)]
    pub rank_tol: f64,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub supply: SupplyArgs,
    /// Use this n_min instead of estimating it from the data.
    #[arg(long)]
    pub nmin: Option<usize>,
    #[arg(long = "feas-tol", default_value_t = 1e-7)]
    pub feas_tol: f64,
    /// Realization of the data-generating system; adds a state storage matrix to the report.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the timing fields so reports are byte-identical across runs.
    #[arg(long = "no-timestamp")]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// System JSON {"A", "B", "C", "D"}; a random system is drawn when absent.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// State dimension of the random system.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of samples.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from x(0) = 0 instead of a random initial state.
    #[arg(long = "zero-initial")]
    pub zero_initial: bool,
    /// Trajectory CSV destination (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the simulated system as JSON.
    #[arg(long = "system-out")]
    pub system_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[command(flatten)]
    pub supply: SupplyArgs,
    #[arg(long = "feas-tol", default_value_t = 1e-7)]
    pub feas_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
