//! `lmss`: batch runner for single solves, benchmark campaigns and GSVD diagnostics.

mod campaign;
mod diagnostics;
mod error;
mod solve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "lmss",
    version,
    about = "Levenberg-Marquardt with singular scaling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and write its iteration trace.
    Solve(Common),
    /// Run the blood-perfusion campaign.
    Perfusion(Common),
    /// Run a thermal-conductivity campaign.
    Conductivity(Common),
    /// Check GSVD and step-bound invariants on matrix pairs.
    Diagnostics(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed (the first seed for campaigns).
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress stdout and progress messages.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve(c) => solve::run(&c),
        Command::Perfusion(c) => campaign::run_perfusion(&c),
        Command::Conductivity(c) => campaign::run_conductivity(&c),
        Command::Diagnostics(c) => diagnostics::run(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            CliError::config(msg.lines().next().unwrap_or("invalid arguments")).emit();
            return ExitCode::from(error::EXIT_CONFIG as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.emit();
            ExitCode::from(e.exit_code as u8)
        }
    }
}
