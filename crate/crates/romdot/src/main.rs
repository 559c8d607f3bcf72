use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use romdot::commands::{cmd_coeffs, cmd_compare_recycling, cmd_invert, cmd_offline, cmd_simulate};
use romdot::config::ExperimentConfig;
use romdot::experiment::{Mode, Setup};
use romdot::threads::Threaded;
use romdot::AppError;

#[derive(Parser)]
#[command(name = "romdot", version, about = "Reduced-order diffuse optical tomography experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (key = value)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fom,
    RomHybrid,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize the phantom and write clean and noisy measurements
    Simulate(Common),
    /// Reconstruct the phantom from simulated data
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "rom-hybrid")]
        mode: ModeArg,
    },
    /// Inner-outer recycling versus per-RHS recycling on systems 1 and 2
    CompareRecycling(Common),
    /// Compute or reuse the eigenvectors and initial solutions at p0
    Offline(Common),
    /// Coefficients of held-out solutions in the global basis
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// Basis file (defaults to the basis of a fresh hybrid run)
        #[arg(long)]
        basis: Option<PathBuf>,
        /// Index of the visited parameter vector (overrides coeffs.system)
        #[arg(long)]
        system: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<String, AppError> {
    let runner = Threaded::from_env();
    let load = |c: &Common| -> Result<Setup, AppError> { Setup::new(ExperimentConfig::load(&c.config)?) };
    match cli.command {
        Command::Simulate(c) => cmd_simulate(&load(&c)?, &c.out, &runner),
        Command::Invert { common, mode } => {
            let mode = match mode {
                ModeArg::Fom => Mode::Fom,
                ModeArg::RomHybrid => Mode::RomHybrid,
            };
            cmd_invert(&load(&common)?, mode, &common.out, &runner)
        }
        Command::CompareRecycling(c) => cmd_compare_recycling(&load(&c)?, &c.out, &runner),
        Command::Offline(c) => cmd_offline(&load(&c)?, &c.out),
        Command::Coeffs { common, basis, system } => {
            cmd_coeffs(&load(&common)?, &common.out, basis.as_deref(), system, &runner)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            print!("{summary}");
            if !summary.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("romdot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
