//! `twave`: solve, reconstruct, verify and sweep finite traveling waves.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "twave",
    version,
    about = "Finite traveling waves of a doubly degenerate diffusion equation with strong absorption"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase-plane trajectory as CSV `theta,upsilon,rhs`
    Trajectory(TrajectoryArgs),
    /// Wave profile as CSV `z,phi,flux`
    Profile(ProfileArgs),
    /// Run every check and write a `key = value` report
    Verify(VerifyArgs),
    /// Verify a grid of parameter sets; one CSV row per cell
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Trajectory(_) => "trajectory",
            Command::Profile(_) => "profile",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
        }
    }
}

/// Model parameters. `sweep` accepts comma-separated lists.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Wave speed (any sign)
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `key = value` file; flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (standard output when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Upper end of the phase-plane range
    #[arg(long)]
    pub theta_max: Option<f64>,
    /// Trajectory tolerance
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output rows per decade of theta, aligned to powers of ten
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Quadrature tolerance
    #[arg(long)]
    pub qtol: Option<f64>,
    /// Number of positive z rows, spaced geometrically
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_min: Option<f64>,
    #[arg(long)]
    pub z_max: Option<f64>,
    /// Also emit mirrored rows for z < 0, where the profile vanishes
    #[arg(long)]
    pub zero_extension: bool,
    /// Add columns `x,u` with `u(x,t) = phi(k t - x)` at this time t
    #[arg(long, allow_hyphen_values = true)]
    pub speed_frame: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub qtol: Option<f64>,
    /// Points of the residual and profile grids
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Write `Y/(A X^q)` ratio curves for every power law to this CSV
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub qtol: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Worker threads (0 = one per core)
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Usage text of one subcommand, for validation errors.
pub fn usage(command: &str) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    match cmd.find_subcommand_mut(command) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => {
                    eprintln!("{}", CliError::usage(e.kind().to_string()).machine_line());
                    ExitCode::from(1)
                }
            };
        }
    };
    let name = cli.command.name();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if matches!(e, CliError::Usage(_)) {
                eprintln!("{}", usage(name));
            }
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code())
        }
    }
}
