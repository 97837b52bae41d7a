//! `bsq`: run simulations, ε-sweeps, invariant suites and calibrations from
//! TOML configuration files. Results are printed to stdout as JSON; artifacts
//! go under `output.dir/output.run_id`.

use std::path::PathBuf;
use std::process::ExitCode;

use bsq_core::experiment::{self, RunConfig};
use bsq_core::verify::{self, Suite};
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "bsq", version, about = "Inviscid 2D Boussinesq solver and lifespan experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one initial condition and write diag.csv, snapshots and summary.json.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Scale θ₀ by each ε (ω₀ fixed) and record the numerical lifespans in sweep.csv.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Comma-separated, strictly decreasing, positive.
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25,0.1,0.01")]
        eps: Vec<f64>,
        /// Worker pool size; defaults to all cores.
        #[arg(long, env = "BSQ_THREADS")]
        threads: Option<usize>,
    },
    /// Run an invariant suite and report pass/fail per check.
    Verify {
        #[arg(long, default_value = "all", value_parser = clap::builder::PossibleValuesParser::new(Suite::NAMES))]
        suite: String,
    },
    /// Fit the transport-estimate constant on one trajectory; writes calibration.json.
    Calibrate {
        #[arg(short, long)]
        config: PathBuf,
    },
}

fn print_json<T: Serialize>(value: &T) -> bsq_core::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(command: Command) -> bsq_core::Result<bool> {
    match command {
        Command::Simulate { config } => {
            let summary = experiment::cmd_simulate(&RunConfig::load(&config)?)?;
            print_json(&summary)?;
            Ok(true)
        }
        Command::Sweep { config, eps, threads } => {
            let result = experiment::cmd_sweep(&RunConfig::load(&config)?, &eps, threads)?;
            print_json(&result)?;
            Ok(true)
        }
        Command::Verify { suite } => {
            let report = verify::run_suite(suite.parse()?)?;
            print_json(&report)?;
            Ok(report.passed)
        }
        Command::Calibrate { config } => {
            let calibration = experiment::cmd_calibrate(&RunConfig::load(&config)?)?;
            print_json(&calibration)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("bsq: {e}");
            ExitCode::FAILURE
        }
    }
}
