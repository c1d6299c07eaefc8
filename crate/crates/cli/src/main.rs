mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

/// Attractivity certificates and Lyapunov verification for competitive
/// reaction-diffusion systems.
///
/// Exit status: 0 granted / all checks pass, 2 certificate denied or a check
/// failed, 1 error.
#[derive(Parser)]
#[command(name = "kolmo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random initial data and perturbations (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the sufficient conditions and write certificate.json
    Certify(Common),
    /// Certify, simulate a pair of solutions and check the envelope
    Verify(Common),
    /// Certify over the Cartesian product of parameter axes
    Sweep {
        #[command(flatten)]
        common: Common,
        /// PATH[,PATH]=v1,v2,... ; paths are dotted config fields
        #[arg(long = "axis")]
        axes: Vec<String>,
    },
    /// Perturb a solution at given times and follow the difference
    Probe(Common),
}

fn run(cli: Cli) -> Result<u8> {
    let (name, common, axes) = match &cli.command {
        Command::Certify(c) => ("certify", c, &[][..]),
        Command::Verify(c) => ("verify", c, &[][..]),
        Command::Sweep { common, axes } => ("sweep", common, axes.as_slice()),
        Command::Probe(c) => ("probe", c, &[][..]),
    };
    let mut value = config::load(&common.config)?;
    if let Some(seed) = common.seed {
        value["seed"] = Value::from(seed);
    }
    let mut cfg = config::from_value(value.clone())?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("kolmo-out"));
    let outcome = match &cli.command {
        Command::Certify(_) => commands::certify(&cfg)?,
        Command::Verify(_) => commands::verify(&cfg)?,
        Command::Probe(_) => commands::probe(&cfg)?,
        Command::Sweep { .. } => {
            let mut all = cfg.sweep.axes.clone();
            for a in axes {
                all.push(config::parse_axis(a)?);
            }
            cfg.sweep.axes = all.clone();
            commands::sweep(&value, &all, common.workers.max(1))?
        }
    };
    // record the effective config; it must not depend on where results go
    cfg.output = None;
    let value = serde_json::to_value(&cfg)?;
    let grid = serde_json::to_value(cfg.grid()?.descriptor())?;
    let hash = outcome.artifacts.write(&out, name, &value, &grid, cfg.seed)?;
    println!("{}", outcome.summary);
    println!("manifest {} ({})", out.join("manifest.json").display(), hash);
    Ok(outcome.status)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
