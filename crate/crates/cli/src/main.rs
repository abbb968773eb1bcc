use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use thermoflow_cli::config::parse_loose;
use thermoflow_cli::{load_config, run_experiment, sweep, CliResult, Experiment, ExperimentConfig, Format, RunManifest, Workers};

#[derive(Parser)]
#[command(name = "thermoflow", version, about = "Work extraction with imperfect thermalization: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(Common),
    /// Run an experiment once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary (`N` addresses `n_values`).
        #[arg(long)]
        axis: String,
        /// Comma-separated values, or a JSON array.
        #[arg(long)]
        values: String,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// Override a config or parameter key, e.g. `--set alpha=0.25`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Thread count or `auto`.
    #[arg(long, env = "THERMOFLOW_WORKERS")]
    workers: Option<Workers>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Common {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut config = load_config(self.config.as_deref(), self.experiment, &self.overrides)?;
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }
}

fn parse_values(raw: &str) -> Vec<Value> {
    match serde_json::from_str::<Value>(raw) {
        Ok(Value::Array(items)) => items,
        _ => raw.split(',').map(|s| parse_loose(s.trim())).collect(),
    }
}

fn report(config: &ExperimentConfig, manifest: &RunManifest) {
    for o in &manifest.outputs {
        println!("{}  {} rows", config.output_dir.join(&o.filename).display(), o.row_count);
    }
    println!("config_hash {}", manifest.config_hash);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => common.resolve().and_then(|c| run_experiment(&c, common.format).map(|m| (c, m))),
        Command::Sweep { common, axis, values } => common
            .resolve()
            .and_then(|c| sweep(&c, axis, &parse_values(values), common.format).map(|m| (c, m))),
    };
    match result {
        Ok((config, manifest)) => {
            report(&config, &manifest);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
