//! Batch front-end for the thermoflow experiments: strict configs,
//! deterministic parallel runs and hashed outputs.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod params;

use serde_json::{json, Value};

pub use config::{load_config, Experiment, ExperimentConfig, Workers, DEFAULT_SEED};
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_NUMERIC};
pub use output::{verify_manifest, Format, RunManifest, MANIFEST_FILE};

use config::{canonical_json, config_hash, sha256_hex};
use experiments::{execute, resolve, Outcome};
use output::{merge_row_groups, write_outputs};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

fn with_pool<R: Send>(workers: Workers, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.threads())
        .build()
        .map_err(|e| CliError::config("workers", e))?;
    Ok(pool.install(f))
}

fn manifest(config: &ExperimentConfig, hash: String) -> RunManifest {
    RunManifest {
        config_hash: hash,
        artifact_version: ARTIFACT_VERSION.to_string(),
        experiment: config.experiment.name().to_string(),
        master_seed: config.master_seed,
        outputs: Vec::new(),
    }
}

/// Runs one experiment and writes its outputs and manifest to
/// `config.output_dir`. A failed gate is reported after the outputs exist.
pub fn run_experiment(config: &ExperimentConfig, format: Format) -> CliResult<RunManifest> {
    let resolved = resolve(config.experiment, &config.parameters)?;
    let Outcome { artifacts, gate } =
        with_pool(config.workers, || execute(config.experiment, &config.parameters, config.master_seed))??;
    let hash = config_hash(config.experiment, config.master_seed, &resolved);
    let written = write_outputs(&config.output_dir, &artifacts, format, manifest(config, hash))?;
    match gate {
        Some(e) => Err(e),
        None => Ok(written),
    }
}

/// The parameter that `axis` addresses: the name itself, or `N` for an
/// `n_values` list (each value then becomes a one-element list).
fn sweep_key(resolved: &Value, axis: &str) -> CliResult<(String, bool)> {
    let obj = resolved.as_object().expect("parameters are an object");
    if obj.contains_key(axis) {
        return Ok((axis.to_string(), false));
    }
    if axis.eq_ignore_ascii_case("n") {
        if obj.contains_key("n_values") {
            return Ok(("n_values".into(), true));
        }
        if obj.contains_key("n") {
            return Ok(("n".into(), false));
        }
    }
    let known: Vec<&str> = obj.keys().map(String::as_str).collect();
    Err(CliError::config("axis", format!("{axis:?} is not a parameter; expected one of {known:?}")))
}

/// Runs the experiment once per axis value and concatenates the row groups.
/// A single-value sweep writes the same files as the equivalent run.
pub fn sweep(config: &ExperimentConfig, axis: &str, values: &[Value], format: Format) -> CliResult<RunManifest> {
    if values.is_empty() {
        return Err(CliError::config("values", "need at least one value"));
    }
    let resolved = resolve(config.experiment, &config.parameters)?;
    let (key, wrap) = sweep_key(&resolved, axis)?;
    let points: Vec<ExperimentConfig> = values
        .iter()
        .map(|v| {
            let v = if wrap { json!([v]) } else { v.clone() };
            let point = config.set(&format!("parameters.{key}"), v)?;
            resolve(point.experiment, &point.parameters)?;
            Ok(point)
        })
        .collect::<CliResult<_>>()?;
    let outcomes = with_pool(config.workers, || {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|p| execute(p.experiment, &p.parameters, p.master_seed))
            .collect::<CliResult<Vec<Outcome>>>()
    })??;
    let mut gate = None;
    let mut groups = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if gate.is_none() {
            gate = o.gate;
        }
        groups.push(o.artifacts);
    }
    let hash = if points.len() == 1 {
        config_hash(config.experiment, config.master_seed, &resolve(config.experiment, &points[0].parameters)?)
    } else {
        let doc = json!({
            "experiment": config.experiment,
            "master_seed": config.master_seed,
            "parameters": resolved,
            "sweep": {"axis": key, "values": values},
        });
        sha256_hex(canonical_json(&doc).as_bytes())
    };
    let written = write_outputs(&config.output_dir, &merge_row_groups(groups), format, manifest(config, hash))?;
    match gate {
        Some(e) => Err(e),
        None => Ok(written),
    }
}
