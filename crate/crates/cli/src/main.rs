use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dtn_helmholtz::Parity;
use dtn_helmholtz_cli::commands;
use dtn_helmholtz_cli::config::{parse_mode, RunConfig};
use dtn_helmholtz_cli::CliError;

#[derive(Parser)]
#[command(
    name = "dtn-helmholtz",
    version,
    about = "Bound states of a semicircle-on-rectangle membrane"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate one mode to self-consistency.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Mode label such as `even,2`; sets parity and the seed kappa.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<(Parity, usize)>,
    },
    /// Converged estimates of the four reference modes for each basis size.
    SweepBasis {
        #[command(flatten)]
        common: Common,
    },
    /// Density grid of one converged mode as CSV and PGM.
    Field {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_mode, default_value = "even,1")]
        mode: (Parity, usize),
    },
    /// Finite-difference eigenvalues with Richardson extrapolation.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// DtN, NtD and finite differences side by side.
    Compare {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

fn print<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serialises")
    );
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { common, mode } => print(&commands::cmd_solve(&load(&common)?, mode)?),
        Command::SweepBasis { common } => print(&commands::cmd_sweep_basis(&load(&common)?)?),
        Command::Field { common, mode } => print(&commands::cmd_field(&load(&common)?, mode)?),
        Command::Oracle { common } => print(&commands::cmd_oracle(&load(&common)?)?),
        Command::Compare { common } => print(&commands::cmd_compare(&load(&common)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
