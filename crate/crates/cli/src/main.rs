use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

mod config;
mod error;
mod output;
mod run;

use config::{Command, ExperimentConfig};
use output::Output;

/// Numerical experiments for the energy-critical wave equation near the soliton W.
#[derive(Parser, Debug)]
#[command(name = "critwave", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; the CRITWAVE_OUT environment variable takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent sub-runs.
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(cli: &Cli) -> Result<String> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = cfg.resolve(cli.command)?;
    let dir = std::env::var_os("CRITWAVE_OUT")
        .map(PathBuf::from)
        .or_else(|| cli.out.clone())
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("critwave-out"));
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(error::ConfigError::new("--threads", "must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting worker pool")?;
    }
    let out = Output::create(&dir)?;
    run::run(cli.command, &cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = error::classify(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| report.message.clone()));
            ExitCode::from(report.exit_code as u8)
        }
    }
}
