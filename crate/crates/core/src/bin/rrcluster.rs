use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rrcluster::experiment::{
    apply_overrides, cmd_account, cmd_bounds, cmd_calibrate, cmd_run, preset, ExperimentConfig, WORKERS_ENV,
};
use rrcluster::{Error, Result};
use serde_json::Value;

/// Differentially private federated clustering simulator.
#[derive(Parser)]
#[command(name = "rrcluster", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (file path or preset:<name>) and write the results CSV.
    Run {
        config: String,
        /// Override a single key, e.g. `--set b=4` or `--set privacy.target_eps=2`.
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the (eps, delta) guarantee of a privacy config JSON.
    Account {
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Find noise multipliers for a target budget (calibration request JSON).
    Calibrate {
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Evaluate the analytic misclustering and convergence bounds.
    Bounds {
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Print a shipped preset config.
    Preset { name: String },
}

fn load_json(path: &PathBuf, overrides: &[String]) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    apply_overrides(&mut v, overrides)?;
    Ok(v)
}

fn typed<T: serde::de::DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Config(format!("invalid config: {e}")))
}

fn workers() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides, output } => {
            let mut doc = match config.strip_prefix("preset:") {
                Some(name) => serde_json::to_value(preset(name)?)?,
                None => load_json(&PathBuf::from(&config), &[])?,
            };
            apply_overrides(&mut doc, &overrides)?;
            let cfg = ExperimentConfig::from_json(&doc.to_string())?;
            let report = cmd_run(&cfg, output.as_deref(), workers()?)?;
            if output.is_none() && cfg.output.is_none() {
                print!("{}", report.to_csv_string()?);
            }
        }
        Command::Account { config, overrides } => {
            let cfg = typed(load_json(&config, &overrides)?)?;
            println!("{}", cmd_account(&cfg)?);
        }
        Command::Calibrate { config, overrides } => {
            let req = typed(load_json(&config, &overrides)?)?;
            println!("{}", cmd_calibrate(&req)?);
        }
        Command::Bounds { config, overrides } => {
            let p = typed(load_json(&config, &overrides)?)?;
            println!("{}", cmd_bounds(&p)?);
        }
        Command::Preset { name } => {
            println!("{}", serde_json::to_string_pretty(&preset(&name)?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
