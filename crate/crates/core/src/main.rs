//! `spreadsim`: runs one experiment scenario from a TOML config.
//!
//! Exit status: 0 when every check passes, 1 when a check fails or the run
//! errors, 2 when the config is invalid or names a different scenario.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spreading::experiments::{self, ExperimentConfig, Scenario};
use spreading::Error;

#[derive(Parser)]
#[command(name = "spreadsim", version, about = "Spreading-block experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Paths {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence time against the raising step δ.
    SweepDelta(Paths),
    /// Convergence under a dead zone that is a multiple of K.
    SweepDeadzone(Paths),
    /// Convergence time against the threshold M with δ = M.
    SweepM(Paths),
    /// Error envelopes under persistent edge-weight perturbation.
    Perturbation(Paths),
    /// Zone-avoiding distance and contamination doses.
    Hazard(Paths),
    /// Cross-checks the stationary-point routines on small random graphs.
    OracleCheck(Paths),
}

impl Command {
    fn split(&self) -> (Scenario, &Paths) {
        match self {
            Command::SweepDelta(p) => (Scenario::SweepDelta, p),
            Command::SweepDeadzone(p) => (Scenario::SweepDeadzone, p),
            Command::SweepM(p) => (Scenario::SweepM, p),
            Command::Perturbation(p) => (Scenario::Perturbation, p),
            Command::Hazard(p) => (Scenario::Hazard, p),
            Command::OracleCheck(p) => (Scenario::OracleCheck, p),
        }
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::InvalidArgument(_) | Error::PerturbationTooLarge { .. })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, paths) = cli.command.split();
    let cfg = match ExperimentConfig::load(&paths.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.scenario != scenario {
        eprintln!("config error: {} describes scenario {}, not {scenario}", paths.config.display(), cfg.scenario);
        return ExitCode::from(2);
    }
    match experiments::run(&cfg, &paths.out) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("wrote {}", paths.out.join(file).display());
            }
            if outcome.passed() {
                println!("{scenario}: all checks passed");
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("check failed: {f}");
                }
                eprintln!("{scenario}: {} check(s) failed", outcome.failures.len());
                ExitCode::from(1)
            }
        }
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
