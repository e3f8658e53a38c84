//! `icn-game`: equilibrium prices, caching sweeps and related tables.

mod commands;
mod config;
mod output;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use icn_game::Error;

use commands::{BrArgs, NashArgs, SweepArgs};
use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing required parameter --{0}")]
    Missing(&'static str),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    fn output(e: impl std::fmt::Display) -> Self {
        CliError::Output(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Missing(_) | CliError::Input(_) => 2,
            CliError::Output(_) => 1,
            CliError::Model(e) => match e {
                Error::SidePaymentTooLarge { .. }
                | Error::PriceOutOfRange { .. }
                | Error::CapacityExceeded { .. } => 3,
                Error::InvalidParameter(_)
                | Error::ModelMismatch(_)
                | Error::NotMonotone { .. }
                | Error::Table(_) => 2,
                Error::NoSignChange { .. }
                | Error::MaxIterExceeded { .. }
                | Error::Domain { .. } => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "icn-game",
    version,
    about = "ISP/CP pricing equilibria with congestion and caching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Config file: JSON object or `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    run: RunConfig,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Demand and its price derivative over a price grid.
    #[command(allow_negative_numbers = true)]
    Demand {
        #[command(flatten)]
        common: Common,
    },
    /// Nash equilibrium prices and utilities.
    #[command(allow_negative_numbers = true)]
    Nash {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: NashArgs,
    },
    /// Equilibria across caching factors.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SweepArgs,
    },
    /// Trajectory of iterated best responses.
    #[command(allow_negative_numbers = true)]
    BrDynamics {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: BrArgs,
    },
    /// Caching cost as a function of the caching factor.
    #[command(allow_negative_numbers = true)]
    CachingCost {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: Common) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(path) => Ok(RunConfig::from_path(path)?.overlay(common.run)),
        None => Ok(common.run),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cfg, report) = match cli.command {
        Command::Demand { common } => {
            let cfg = resolve(common)?;
            let r = commands::demand(&cfg)?;
            (cfg, r)
        }
        Command::Nash { common, args } => {
            let cfg = resolve(common)?;
            let r = commands::nash(&cfg, &args)?;
            (cfg, r)
        }
        Command::Sweep { common, args } => {
            let cfg = resolve(common)?;
            let r = commands::sweep(&cfg, &args)?;
            (cfg, r)
        }
        Command::BrDynamics { common, args } => {
            let cfg = resolve(common)?;
            let r = commands::br_dynamics(&cfg, &args)?;
            (cfg, r)
        }
        Command::CachingCost { common } => {
            let cfg = resolve(common)?;
            let r = commands::caching_cost(&cfg)?;
            (cfg, r)
        }
    };
    let text = report.render(cfg.format.unwrap_or_default())?;
    match &cfg.output {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
        }
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(CliError::output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Model(Error::SidePaymentTooLarge { bound, .. }) = &e {
                eprintln!("bound: {bound}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
