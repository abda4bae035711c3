//! `fndam` experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fndam::config::ExperimentConfig;
use fndam::experiments::{self, CommandOutput};
use fndam::Error;

#[derive(Parser)]
#[command(name = "fndam", version, about = "Fowler-Nordheim dynamic analog memory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: `output_dir` from the config, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment for `train`: perceptron or network.
    #[arg(long, global = true)]
    experiment: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Refit k1, k2 and the coupling ratio; writes the fitted device block.
    Calibrate,
    /// Regime traces, pulse sequences and sweeps, common-mode disturbance.
    Characterize,
    /// Per-update write energy over the configured horizon.
    EnergyReport,
    /// Retention time against the noise floor over bias and age grids.
    RetentionReport,
    /// Perceptron or network training with DAM-backed weights.
    Train,
}

fn resolve(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.apply_seed(seed);
    }
    if let Some(name) = &cli.experiment {
        config.experiment.name = Some(name.clone());
    }
    config.validate()?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, out))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Error> {
    let (config, out) = resolve(cli)?;
    let output: CommandOutput = match cli.command {
        Command::Calibrate => experiments::cmd_calibrate(&config)?,
        Command::Characterize => experiments::cmd_characterize(&config)?,
        Command::EnergyReport => experiments::cmd_energy_report(&config)?,
        Command::RetentionReport => experiments::cmd_retention_report(&config)?,
        Command::Train => experiments::cmd_train(&config)?,
    };
    experiments::write_outputs(&out, &output, &config)
}

fn error_record(e: &Error) -> serde_json::Value {
    let mut record = serde_json::json!({
        "status": "error",
        "kind": e.kind(),
        "message": e.to_string(),
    });
    if let Error::Config { path, .. } | Error::Parse { path, .. } = e {
        record["path"] = serde_json::Value::String(path.clone());
    }
    record
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            match e {
                Error::Config { .. } | Error::Parse { .. } | Error::Argument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
