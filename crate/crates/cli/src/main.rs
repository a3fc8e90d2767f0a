mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "announce-planner", version, about = "Plan project completion-date announcements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where the problem configuration comes from.
#[derive(Debug, Clone, Args)]
pub struct ConfigSource {
    /// Problem config JSON file.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named preset: small, medium, large or extra-large.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Qmdp,
    Sarsop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a policy and write it to a file.
    Solve(SolveArgs),
    /// Evaluate policies on common random numbers.
    Simulate(SimulateArgs),
    /// Sweep the error and change weights and extract the Pareto frontier.
    Sweep(SweepArgs),
    /// Run one episode with a pinned completion week and record beliefs.
    Scenario(ScenarioArgs),
    /// Collate simulate, sweep and scenario outputs into plot-ready series.
    Report(ReportArgs),
    /// Run the HTTP advisor service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    #[arg(long, value_enum)]
    pub solver: Solver,
    #[arg(long)]
    pub out: PathBuf,
    /// Value-iteration residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Target bound gap at the initial belief (sarsop).
    #[arg(long, default_value_t = 1e-3)]
    pub precision: f64,
    /// Wall-clock budget in seconds (sarsop).
    #[arg(long, default_value_t = 600.0)]
    pub time_budget: f64,
    /// Cap on forward trials (sarsop); makes the result machine independent.
    #[arg(long)]
    pub max_trials: Option<usize>,
    /// Exit 0 even if the solver stopped before converging.
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Comma-separated policy kinds (qmdp, sarsop, mostlikely, observedtime)
    /// or policy file paths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub policies: Vec<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, env = "ANNOUNCE_PLANNER_WORKERS")]
    pub workers: Option<usize>,
    /// Trial cap for sarsop policies solved inline.
    #[arg(long, default_value_t = 200)]
    pub sarsop_trials: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Comma-separated weights used for both the error and change penalties.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,3,5,8,12,20")]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, env = "ANNOUNCE_PLANNER_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Policy kind or policy file path.
    #[arg(long)]
    pub policy: String,
    #[arg(long)]
    pub initial_completion: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub sarsop_trials: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of policy files and config files to serve.
    #[arg(long)]
    pub policies_dir: Option<PathBuf>,
    /// Session snapshot restored at startup and written on shutdown.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Scenario(a) => commands::scenario(a),
        Command::Report(a) => report::run(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
