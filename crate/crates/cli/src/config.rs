//! Strict JSON config, `--set` overrides and the canonical hash.

use std::fmt;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Master seed used when a config does not set one.
pub const DEFAULT_SEED: u64 = 0x7468_6572_6D6F_666C;

pub const DEFAULT_OUTPUT_DIR: &str = "thermoflow-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[value(name = "fig3-loss")]
    Fig3Loss,
    #[value(name = "fig4-histograms")]
    Fig4Histograms,
    #[value(name = "qudit-convergence")]
    QuditConvergence,
    #[value(name = "breakdown-scaling")]
    BreakdownScaling,
    #[value(name = "fig5-fig6-tth")]
    Fig5Fig6Tth,
    #[value(name = "custom")]
    Custom,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig3Loss => "fig3-loss",
            Experiment::Fig4Histograms => "fig4-histograms",
            Experiment::QuditConvergence => "qudit-convergence",
            Experiment::BreakdownScaling => "breakdown-scaling",
            Experiment::Fig5Fig6Tth => "fig5-fig6-tth",
            Experiment::Custom => "custom",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rayon pool size: a positive count or `"auto"` (all cores).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Workers {
    #[default]
    Auto,
    Count(NonZeroUsize),
}

impl Workers {
    pub fn threads(self) -> usize {
        match self {
            Workers::Auto => 0,
            Workers::Count(n) => n.get(),
        }
    }
}

impl FromStr for Workers {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Workers::Auto);
        }
        s.parse::<NonZeroUsize>()
            .map(Workers::Count)
            .map_err(|_| format!("expected a positive integer or \"auto\", got {s:?}"))
    }
}

impl Serialize for Workers {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Workers::Auto => s.serialize_str("auto"),
            Workers::Count(n) => s.serialize_u64(n.get() as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Workers {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Workers;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or \"auto\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Workers, E> {
                NonZeroUsize::new(v as usize)
                    .map(Workers::Count)
                    .ok_or_else(|| E::invalid_value(de::Unexpected::Unsigned(v), &self))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Workers, E> {
                if v > 0 {
                    self.visit_u64(v as u64)
                } else {
                    Err(E::invalid_value(de::Unexpected::Signed(v), &self))
                }
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Workers, E> {
                v.parse().map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub workers: Workers,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(DEFAULT_OUTPUT_DIR)
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            parameters: Map::new(),
            master_seed: DEFAULT_SEED,
            workers: Workers::Auto,
            output_dir: default_output_dir(),
        }
    }

    /// Parses JSON text, reporting the key path of the first violation.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::config("<root>", e))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> CliResult<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner())
        })
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Sets `key` to `value`; `key` is a top-level field, `parameters.<name>`
    /// or a bare parameter name.
    pub fn set(&self, key: &str, value: Value) -> CliResult<Self> {
        let mut root = self.to_value();
        let obj = root.as_object_mut().expect("config is an object");
        let top = ["experiment", "master_seed", "workers", "output_dir"];
        if top.contains(&key) {
            obj.insert(key.to_string(), value);
        } else {
            let name = key.strip_prefix("parameters.").unwrap_or(key);
            if name.is_empty() || name.contains('.') {
                return Err(CliError::config(key, "nested parameter keys are not supported"));
            }
            obj.get_mut("parameters")
                .and_then(Value::as_object_mut)
                .expect("parameters is an object")
                .insert(name.to_string(), value);
        }
        Self::from_value(root)
    }

    /// Applies `key=value` overrides in order. Values are read as JSON and
    /// fall back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> CliResult<Self> {
        let mut out = self.clone();
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| CliError::config(raw, "override must look like key=value"))?;
            out = out.set(key.trim(), parse_loose(value.trim()))?;
        }
        Ok(out)
    }
}

/// JSON if it parses, otherwise the raw string.
pub fn parse_loose(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Loads the config file (if any), forces the experiment (if given) and
/// applies overrides.
pub fn load_config<S: AsRef<str>>(
    path: Option<&Path>,
    experiment: Option<Experiment>,
    overrides: &[S],
) -> CliResult<ExperimentConfig> {
    let base = match (path, experiment) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::config(p.display().to_string(), e))?;
            ExperimentConfig::from_json(&text)?
        }
        (None, Some(e)) => ExperimentConfig::new(e),
        (None, None) => return Err(CliError::config("experiment", "give --config or --experiment")),
    };
    let base = match experiment {
        Some(e) if e != base.experiment => ExperimentConfig { experiment: e, ..base },
        _ => base,
    };
    base.with_overrides(overrides)
}

/// Compact JSON with sorted keys and integral floats written as integers.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push(':');
                write_canonical(&map[*k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => out.push_str(&i.to_string()),
            (_, Some(u), _) => out.push_str(&u.to_string()),
            (_, _, Some(f)) if f.fract() == 0.0 && f.abs() < 9.007_199_254_740_992e15 => {
                out.push_str(&(f as i64).to_string())
            }
            _ => out.push_str(&n.to_string()),
        },
        other => out.push_str(&other.to_string()),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over experiment, seed and the resolved parameters (defaults filled
/// in). `workers` and `output_dir` do not affect results and are left out.
pub fn config_hash(experiment: Experiment, master_seed: u64, resolved: &Value) -> String {
    let doc = serde_json::json!({
        "experiment": experiment,
        "master_seed": master_seed,
        "parameters": resolved,
    });
    sha256_hex(canonical_json(&doc).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_key_rejected() {
        let err = ExperimentConfig::from_json(r#"{"experiment": "fig3-loss", "master_seeed": 3}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("master_seeed"), "{err}");
    }

    #[test]
    fn workers_accept_count_or_auto() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "custom", "workers": 4}"#).unwrap();
        assert_eq!(c.workers.threads(), 4);
        let c = ExperimentConfig::from_json(r#"{"experiment": "custom", "workers": "auto"}"#).unwrap();
        assert_eq!(c.workers, Workers::Auto);
        assert!(ExperimentConfig::from_json(r#"{"experiment": "custom", "workers": 0}"#).is_err());
    }

    #[test]
    fn overrides_route_to_parameters() {
        let c = ExperimentConfig::new(Experiment::Fig3Loss)
            .with_overrides(&["alpha=0.25", "parameters.label=x y", "master_seed=9"])
            .unwrap();
        assert_eq!(c.parameters["alpha"], serde_json::json!(0.25));
        assert_eq!(c.parameters["label"], serde_json::json!("x y"));
        assert_eq!(c.master_seed, 9);
        assert!(c.with_overrides(&["alpha"]).is_err());
    }

    #[test]
    fn canonical_form_sorts_and_normalizes() {
        let a: Value = serde_json::from_str(r#"{"b": 1.0, "a": [2, 0.5]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a": [2.0, 0.5], "b": 1}"#).unwrap();
        assert_eq!(canonical_json(&a), r#"{"a":[2,0.5],"b":1}"#);
        assert_eq!(canonical_json(&a), canonical_json(&b));
    }

    #[test]
    fn hash_is_stable_and_seed_dependent() {
        let params = serde_json::json!({"alpha": 0.5});
        assert_eq!(
            config_hash(Experiment::Fig3Loss, 1, &params),
            config_hash(Experiment::Fig3Loss, 1, &params)
        );
        assert_ne!(
            config_hash(Experiment::Fig3Loss, 1, &params),
            config_hash(Experiment::Fig3Loss, 2, &params)
        );
    }
}
