mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fincrash::netmodel::{EquilibriumPolicy, NoiseMode};
use fincrash::Error;

#[derive(Debug, Parser)]
#[command(name = "fincrash", version, about = "Equilibria and crash forecasts for cross-holding networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded random network as JSON.
    Generate(GenerateArgs),
    /// Solve the classical equilibrium of a (optionally shocked) network.
    Equilibrium(EquilibriumArgs),
    /// Failure count against shock amplitude, as CSV.
    Sweep(SweepArgs),
    /// Step function and its Legendre approximants on a grid, as CSV.
    ApproxGrid(ApproxGridArgs),
    /// Build the cost polynomial and export a 2-local QUBO.
    Compile(CompileArgs),
    /// Find the ground state of a compiled program or QUBO file.
    Solve(SolveArgs),
    /// Term, spin and qubit counts for given sizes.
    Resources(ResourcesArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Above,
    Below,
    Worst,
}

impl From<Policy> for EquilibriumPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Above => EquilibriumPolicy::FromAbove,
            Policy::Below => EquilibriumPolicy::FromBelow,
            Policy::Worst => EquilibriumPolicy::WorstOverEnumeration,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    /// Independent draw per amplitude.
    Fresh,
    /// One draw scaled by every amplitude.
    Shared,
}

impl From<Noise> for NoiseMode {
    fn from(n: Noise) -> Self {
        match n {
            Noise::Fresh => NoiseMode::Fresh,
            Noise::Shared => NoiseMode::Shared,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long, default_value_t = 0.5)]
    pub min_self: f64,
    #[arg(long, default_value_t = 100.0)]
    pub price_max: f64,
    #[arg(long, default_value_t = 0.8)]
    pub beta_frac: f64,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EquilibriumArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Policy::Above)]
    pub policy: Policy,
    /// Shock amplitude applied to the prices before solving.
    #[arg(long, default_value_t = 0.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also list every self-consistent failure set.
    #[arg(long)]
    pub enumerate: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Policy::Above)]
    pub policy: Policy,
    #[arg(long, default_value = "0:80:1")]
    pub amplitudes: String,
    #[arg(long, value_enum, default_value_t = Noise::Fresh)]
    pub noise: Noise,
    /// Transition-window JSON; defaults to `<out>.summary.json`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ApproxGridArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated truncation orders.
    #[arg(long, default_value = "10,30,50,70")]
    pub orders: String,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CompileArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// QUBO path. The program bundle, polynomial dump and resource report
    /// are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long, default_value_t = 10.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub prune_rel: f64,
    /// Maximum spin count; 0 disables the cap.
    #[arg(long, default_value_t = 64)]
    pub spin_cap: usize,
    /// One ancilla coupling scale for all gadgets instead of per term.
    #[arg(long)]
    pub global_scale: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    /// Program bundle (`.json`) from `compile`, or a QUBO file.
    #[arg(long)]
    pub input: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, conflicts_with = "anneal")]
    pub exhaustive: bool,
    #[arg(long)]
    pub anneal: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Network for decoding a bare QUBO file.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ResourcesArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// Build the actual polynomial of this network and count its terms.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 4,
        Error::NonConvergence { .. }
        | Error::InstanceTooLarge { .. }
        | Error::TermBudget { .. }
        | Error::DegreeOverflow { .. }
        | Error::SingularSystem { .. } => 3,
        Error::InvalidNetwork(_)
        | Error::InvalidParameter { .. }
        | Error::CoefficientMismatch { .. }
        | Error::OutOfRange { .. }
        | Error::LengthMismatch { .. }
        | Error::Parse { .. }
        | Error::Json(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Equilibrium(a) => commands::equilibrium(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::ApproxGrid(a) => commands::approx_grid(a),
        Command::Compile(a) => commands::compile(a),
        Command::Solve(a) => commands::solve(a),
        Command::Resources(a) => commands::resources(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
