use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tapersim::experiments::{
    cmd_adiabatic_scan, cmd_calibrate, cmd_sweep_power, cmd_sweep_reps, cmd_sweep_wavelength, ExperimentConfig,
};
use tapersim::{Error, Result};

const EXIT_USAGE: u8 = 2;
const EXIT_PHYSICS: u8 = 3;

#[derive(Parser)]
#[command(name = "tapersim", version, about = "Laser-written waveguide taper simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the material model and write it with a residual report.
    Calibrate(Io),
    /// Facet MFDs against the ramp end power.
    SweepPower(Io),
    /// Untapered and tapered MFDs against wavelength.
    SweepWavelength(Io),
    /// Coupling and transmission against the number of reruns.
    SweepReps(Io),
    /// Transmission against taper length.
    AdiabaticScan(Io),
}

fn run(command: Command) -> Result<String> {
    let (Command::Calibrate(io)
    | Command::SweepPower(io)
    | Command::SweepWavelength(io)
    | Command::SweepReps(io)
    | Command::AdiabaticScan(io)) = &command;
    let cfg = ExperimentConfig::load(&io.config)?;
    let out = &io.out;
    Ok(match command {
        Command::Calibrate(_) => {
            let c = cmd_calibrate(&cfg, out)?;
            format!("calibrated in {} evaluations, residual {:.3e}", c.evaluations, c.residual)
        }
        Command::SweepPower(_) => format!("{} rows", cmd_sweep_power(&cfg, out)?.len()),
        Command::SweepWavelength(_) => format!("{} rows", cmd_sweep_wavelength(&cfg, out)?.len()),
        Command::SweepReps(_) => format!("{} rows", cmd_sweep_reps(&cfg, out)?.len()),
        Command::AdiabaticScan(_) => {
            let rows = cmd_adiabatic_scan(&cfg, out)?;
            match rows.iter().find(|r| r.flagged) {
                Some(r) => format!("{} rows, shortest adiabatic length {} mm", rows.len(), r.length_mm),
                None => format!("{} rows, no length reached the adiabatic threshold", rows.len()),
            }
        }
    })
}

fn exit_code(e: &Error) -> u8 {
    if e.is_physics() {
        EXIT_PHYSICS
    } else {
        EXIT_USAGE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
