//! `local-consensus`: run simulations, frequency and noise experiments, and the acceptance checks.
//!
//! Exit codes: 0 success, 1 invalid input, 2 the simulation diverged, 3 an acceptance criterion failed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::AcceptanceFailed;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "local-consensus", version, about = "Local average consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config layered over the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `chain.master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `section.key=value`, applied after the config file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm and write the full trace.
    Simulate,
    /// Measured against analytic spatial gain at ring harmonics.
    FreqSpatial,
    /// Measured against analytic temporal gain for the time-varying schemes.
    FreqTemporal,
    /// Monte Carlo output variance under i.i.d. measurement noise.
    Noise,
    /// Monte Carlo mean and variance under random sensor spacing.
    Spacing,
    /// Gain curves for the standard parameter grids.
    Figures,
    /// Run the acceptance checks.
    Verify {
        /// Run only these criteria (1-10). Repeatable.
        #[arg(long = "criterion")]
        ids: Vec<u8>,
    },
}

fn execute(cli: &Cli) -> Result<()> {
    if let Command::Verify { ids } = &cli.command {
        let results = commands::verify(ids)?;
        for r in &results {
            println!("{r}");
        }
        let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
        println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
        return if failed.is_empty() { Ok(()) } else { Err(AcceptanceFailed(failed).into()) };
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), cli.seed, cli.out.as_deref(), &cli.sets)?;
    let written = match cli.command {
        Command::Simulate => commands::simulate(&cfg)?,
        Command::FreqSpatial => commands::freq_spatial(&cfg)?,
        Command::FreqTemporal => commands::freq_temporal(&cfg)?,
        Command::Noise => commands::noise(&cfg)?,
        Command::Spacing => commands::spacing(&cfg)?,
        Command::Figures => commands::figures(&cfg)?,
        Command::Verify { .. } => unreachable!(),
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<AcceptanceFailed>().is_some() {
        return 3;
    }
    match err.downcast_ref::<local_consensus::Error>() {
        Some(local_consensus::Error::Diverged { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
