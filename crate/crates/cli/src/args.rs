use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "rankcontest",
    version,
    about = "Equilibria and reward design for rank-order stopping contests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium quantile, cdf and value function on a grid
    #[command(allow_negative_numbers = true, args_override_self = true)]
    Equilibrium(EquilibriumArgs),
    /// Performance, duration, order statistics and expected utilities
    #[command(allow_negative_numbers = true, args_override_self = true)]
    Metrics(MetricsArgs),
    /// Optimal reward scheme for a principal objective
    #[command(allow_negative_numbers = true, args_override_self = true)]
    Optimize(OptimizeArgs),
    /// Drift sweeps and cut-off panels
    #[command(allow_negative_numbers = true, args_override_self = true)]
    Sweep(SweepArgs),
    /// Monte Carlo verification of the equilibrium
    #[command(allow_negative_numbers = true, args_override_self = true)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Number of players; taken from --reward when it is an explicit list
    #[arg(long)]
    pub n: Option<usize>,
    /// Drift
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    /// Volatility
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Starting level
    #[arg(long, default_value_t = 100.0)]
    pub x0: f64,
    /// wta, uniform, cutoff:J or a comma-separated reward list
    #[arg(long, default_value = "wta")]
    pub reward: String,
    /// Output file (standard output if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File of `key = value` lines applied before the command-line flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ranks whose expected level is reported (default: all)
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub k: Vec<usize>,
    /// Utilities: linear, power:GAMMA, exp:GAMMA
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub utility: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    Average,
    FirstRank,
    RankK,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "rank-k")]
    pub objective: Objective,
    /// Targeted rank for rank-k
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed of the first-rank verification sweep
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    /// `mu,scheme_id,expected_performance` over a drift grid
    Drift,
    /// `j,objective` for every cut-off at fixed n and k
    KstarPanel,
    /// `n,kstar_over_n` with k = round(alpha n)
    KstarRatio,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "drift")]
    pub mode: SweepMode,
    #[arg(long, default_value_t = -0.03)]
    pub mu_min: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu_max: f64,
    /// Number of drift grid points
    #[arg(long, default_value_t = 101)]
    pub mu_steps: usize,
    /// Semicolon-separated reward specs (default: --reward)
    #[arg(long)]
    pub schemes: Option<String>,
    /// Targeted rank for kstar-panel
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3)]
    pub n_min: usize,
    #[arg(long, default_value_t = 100)]
    pub n_max: usize,
    /// Skip drift grid points at or above a scheme's bound instead of failing
    #[arg(long)]
    pub skip_infeasible: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, required = true)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    pub games: u64,
    /// Number of simulated diffusion paths
    #[arg(long, default_value_t = 10_000)]
    pub paths: u64,
    /// Euler step for the path check (default 1e-4 (xbar/sigma)^2)
    #[arg(long)]
    pub path_step: Option<f64>,
    /// Points of the best-response grid
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Exit with code 4 when any estimate is more than 4 standard errors off
    #[arg(long)]
    pub strict: bool,
}
