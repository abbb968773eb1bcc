//! Typed parameter sets, one per experiment, with their defaults.

use std::fmt;
use std::marker::PhantomData;

use num_complex::Complex;
use serde::de::{self, DeserializeOwned, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thermoflow_core::collision::{AlphaDistribution, BathSchedule, NoiseModel};
use thermoflow_core::linalg::CMatrix;
use thermoflow_core::maps::{ChannelKind, EvolutionMode};
use thermoflow_core::qudit::{self, HamiltonianPath, Profile};
use thermoflow_core::thermo::{HamiltonianMatrix, Temperature};
use thermoflow_core::tth::AlphaModel;

use crate::error::{CliError, CliResult};

/// Enums that can also be named by a bare string, taking default fields.
pub trait Preset: Sized {
    const NAMES: &'static [&'static str];
    fn from_name(name: &str) -> Option<Self>;
}

/// Accepts `"name"` or `{"name": {...}}`.
pub fn string_or_tagged<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de> + Preset,
{
    struct V<T>(PhantomData<T>);
    impl<'de, T: Deserialize<'de> + Preset> Visitor<'de> for V<T> {
        type Value = T;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            write!(f, "one of {:?} or a single-key object", T::NAMES)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<T, E> {
            T::from_name(v).ok_or_else(|| E::unknown_variant(v, T::NAMES))
        }

        fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<T, A::Error> {
            T::deserialize(de::value::MapAccessDeserializer::new(map))
        }
    }
    d.deserialize_any(V(PhantomData))
}

/// Parses `parameters` into `P`, reporting paths as `parameters.<key>`.
pub fn parse<P: DeserializeOwned>(params: &Map<String, Value>) -> CliResult<P> {
    serde_path_to_error::deserialize(Value::Object(params.clone())).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { "parameters".to_string() } else { format!("parameters.{inner}") };
        CliError::config(path, e.into_inner())
    })
}

/// `None` means bit units, T = 1/ln 2.
pub fn temperature(t: Option<f64>) -> thermoflow_core::Result<Temperature<f64>> {
    match t {
        None => Ok(Temperature::bit_units()),
        Some(v) => Temperature::new(v),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileSpec {
    Linear,
    #[default]
    Smoothstep,
}

impl From<ProfileSpec> for Profile {
    fn from(p: ProfileSpec) -> Self {
        match p {
            ProfileSpec::Linear => Profile::Linear,
            ProfileSpec::Smoothstep => Profile::Smoothstep,
        }
    }
}

/// A matrix entry: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<Entry>>);

impl MatrixSpec {
    pub fn hamiltonian(&self) -> thermoflow_core::Result<HamiltonianMatrix<f64>> {
        let rows = self
            .0
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| match *e {
                        Entry::Real(x) => Complex::new(x, 0.0),
                        Entry::Complex([re, im]) => Complex::new(re, im),
                    })
                    .collect()
            })
            .collect();
        HamiltonianMatrix::new(CMatrix::from_rows(rows).ok_or(thermoflow_core::Error::NotSquare)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearQ {
    pub q0: f64,
    pub q1: f64,
    pub profile: ProfileSpec,
}

impl Default for LinearQ {
    fn default() -> Self {
        Self {
            q0: 0.1,
            q1: 0.5,
            profile: ProfileSpec::Smoothstep,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapRamp {
    pub e0: f64,
    pub e1: f64,
    pub profile: ProfileSpec,
}

impl Default for GapRamp {
    fn default() -> Self {
        Self {
            e0: 0.5,
            e1: 2.5,
            profile: ProfileSpec::Smoothstep,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomDiagonal {
    pub seed: u64,
    pub profile: ProfileSpec,
}

impl Default for RandomDiagonal {
    fn default() -> Self {
        Self {
            seed: 7,
            profile: ProfileSpec::Smoothstep,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotatingField {
    pub b: f64,
}

impl Default for RotatingField {
    fn default() -> Self {
        Self { b: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    pub h0: MatrixSpec,
    pub h1: MatrixSpec,
    #[serde(default)]
    pub profile: ProfileSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathSpec {
    QubitLinearQ(LinearQ),
    QubitGapRamp(GapRamp),
    RandomDiagonalD4(RandomDiagonal),
    RotatingField(RotatingField),
    EndpointPair(Endpoints),
}

impl Preset for PathSpec {
    const NAMES: &'static [&'static str] = &["qubit-linear-q", "qubit-gap-ramp", "random-diagonal-d4", "rotating-field"];

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "qubit-linear-q" => PathSpec::QubitLinearQ(LinearQ::default()),
            "qubit-gap-ramp" => PathSpec::QubitGapRamp(GapRamp::default()),
            "random-diagonal-d4" => PathSpec::RandomDiagonalD4(RandomDiagonal::default()),
            "rotating-field" => PathSpec::RotatingField(RotatingField::default()),
            _ => return None,
        })
    }
}

impl PathSpec {
    pub fn build(&self, temp: Temperature<f64>) -> thermoflow_core::Result<HamiltonianPath<f64>> {
        match self {
            PathSpec::QubitLinearQ(p) => qudit::qubit_linear_q(p.q0, p.q1, temp, p.profile.into()),
            PathSpec::QubitGapRamp(p) => qudit::qubit_gap_ramp(p.e0, p.e1, temp, p.profile.into()),
            PathSpec::RandomDiagonalD4(p) => qudit::random_diagonal(4, p.seed, temp, p.profile.into()),
            PathSpec::RotatingField(p) => qudit::rotating_field(p.b, temp),
            PathSpec::EndpointPair(p) => qudit::endpoint_pair(p.h0.hamiltonian()?, p.h1.hamiltonian()?, temp, p.profile.into()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelSpec {
    #[default]
    PartialTherm,
    PinchThenMix,
}

impl ChannelSpec {
    pub fn build(self, lambda: f64) -> thermoflow_core::Result<ChannelKind<f64>> {
        match self {
            ChannelSpec::PartialTherm => ChannelKind::partial_therm(lambda),
            ChannelSpec::PinchThenMix => ChannelKind::pinch_then_mix(lambda),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    #[default]
    Unitary,
    Quench,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosineSq {
    pub g: f64,
}

impl Default for CosineSq {
    fn default() -> Self {
        Self { g: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exponential {
    pub tau_th: f64,
}

impl Default for Exponential {
    fn default() -> Self {
        Self { tau_th: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tabulated {
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaModelSpec {
    CosineSq(CosineSq),
    Exponential(Exponential),
    Tabulated(Tabulated),
}

impl Preset for AlphaModelSpec {
    const NAMES: &'static [&'static str] = &["cosine-sq", "exponential"];

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "cosine-sq" => Some(AlphaModelSpec::CosineSq(CosineSq::default())),
            "exponential" => Some(AlphaModelSpec::Exponential(Exponential::default())),
            _ => None,
        }
    }
}

impl AlphaModelSpec {
    pub fn build(&self) -> thermoflow_core::Result<AlphaModel<f64>> {
        match self {
            AlphaModelSpec::CosineSq(m) => AlphaModel::cosine_sq(m.g),
            AlphaModelSpec::Exponential(m) => AlphaModel::exponential(m.tau_th),
            AlphaModelSpec::Tabulated(m) => AlphaModel::tabulated(m.times.clone(), m.alphas.clone()),
        }
    }

    /// Default scan window: the first branch for `cosine-sq`, three decades
    /// around τ_th for `exponential`, the table span otherwise.
    pub fn default_range(&self) -> (f64, f64) {
        match self {
            AlphaModelSpec::CosineSq(m) => {
                let end = std::f64::consts::PI / m.g;
                (1e-3 * end, 0.999 * end)
            }
            AlphaModelSpec::Exponential(m) => (1e-3 * m.tau_th, 10.0 * m.tau_th),
            AlphaModelSpec::Tabulated(m) => {
                let last = m.times.last().copied().unwrap_or(1.0);
                let first = m.times.iter().copied().find(|&t| t > 0.0).unwrap_or(1e-3 * last);
                (first, last)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseSpec {
    Fixed { alpha: f64 },
    Uniform { lo: f64, hi: f64 },
    TwoPoint { low: f64, high: f64, p_high: f64 },
}

impl NoiseSpec {
    pub fn build(&self, seed: u64) -> NoiseModel<f64> {
        match *self {
            NoiseSpec::Fixed { alpha } => NoiseModel::fixed(alpha),
            NoiseSpec::Uniform { lo, hi } => NoiseModel::Random {
                dist: AlphaDistribution::Uniform { lo, hi },
                seed,
            },
            NoiseSpec::TwoPoint { low, high, p_high } => NoiseModel::Random {
                dist: AlphaDistribution::TwoPoint { low, high, p_high },
                seed,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `q_k = k/(2N)`.
    #[default]
    Canonical,
    Linear { q_start: f64, q_end: f64 },
    Explicit { q: Vec<f64> },
}

impl ScheduleSpec {
    pub fn build(&self, n: usize, temp: Temperature<f64>) -> thermoflow_core::Result<BathSchedule<f64>> {
        match self {
            ScheduleSpec::Canonical => BathSchedule::linear(n, temp),
            ScheduleSpec::Linear { q_start, q_end } => BathSchedule::linear_between(*q_start, *q_end, n, temp),
            ScheduleSpec::Explicit { q } => {
                if q.len() != n + 1 {
                    return Err(thermoflow_core::Error::InvalidSchedule(format!(
                        "explicit schedule has {} entries, need N + 1 = {}",
                        q.len(),
                        n + 1
                    )));
                }
                BathSchedule::new(q.clone(), temp)
            }
        }
    }
}

/// `10^(1 + k/4)` for k = 0..16, rounded.
pub fn log_grid() -> Vec<usize> {
    (0..=16).map(|k| 10f64.powf(1.0 + k as f64 / 4.0).round() as usize).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Params {
    pub alpha: f64,
    pub temperature: Option<f64>,
    pub n_values: Vec<usize>,
}

impl Default for Fig3Params {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            temperature: None,
            n_values: log_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Params {
    pub alpha: f64,
    pub temperature: Option<f64>,
    pub n_values: Vec<usize>,
    pub runs: usize,
    pub bins: usize,
}

impl Default for Fig4Params {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            temperature: None,
            n_values: vec![100, 200, 500, 1000],
            runs: 10_000,
            bins: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuditParams {
    #[serde(deserialize_with = "string_or_tagged")]
    pub path: PathSpec,
    pub temperature: f64,
    pub alpha: f64,
    pub n_values: Vec<usize>,
}

impl Default for QuditParams {
    fn default() -> Self {
        Self {
            path: PathSpec::QubitGapRamp(GapRamp::default()),
            temperature: 1.0,
            alpha: 0.5,
            n_values: vec![250, 500, 1000, 2000],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakdownParams {
    #[serde(deserialize_with = "string_or_tagged")]
    pub path: PathSpec,
    pub temperature: f64,
    pub alpha: f64,
    pub channel: ChannelSpec,
    pub mode: ModeSpec,
    pub substeps: usize,
    pub n_values: Vec<usize>,
    /// Run a non-cyclic path as an open segment.
    pub open_segment: bool,
}

impl Default for BreakdownParams {
    fn default() -> Self {
        Self {
            path: PathSpec::RotatingField(RotatingField::default()),
            temperature: 0.8,
            alpha: 0.5,
            channel: ChannelSpec::PartialTherm,
            mode: ModeSpec::Unitary,
            substeps: thermoflow_core::maps::DEFAULT_SUBSTEPS,
            n_values: vec![100, 200, 400],
            open_segment: false,
        }
    }
}

impl BreakdownParams {
    pub fn evolution(&self) -> EvolutionMode {
        match self.mode {
            ModeSpec::Unitary => EvolutionMode::Unitary { substeps: self.substeps },
            ModeSpec::Quench => EvolutionMode::Quench,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TthParams {
    #[serde(deserialize_with = "string_or_tagged")]
    pub model: AlphaModelSpec,
    pub gamma: f64,
    pub total_time: f64,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: usize,
    pub tol: f64,
}

impl Default for TthParams {
    fn default() -> Self {
        Self {
            model: AlphaModelSpec::CosineSq(CosineSq::default()),
            gamma: 1.0,
            total_time: 100.0,
            t_min: None,
            t_max: None,
            points: 200,
            tol: 1e-10,
        }
    }
}

fn default_bins() -> usize {
    60
}

/// A single qubit protocol; `n` and `noise` are required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomParams {
    pub n: usize,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub p0: f64,
    #[serde(default)]
    pub eps_s: f64,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub runs: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn map(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let p: QuditParams = parse(&Map::new()).unwrap();
        assert_eq!(p, QuditParams::default());
        assert_eq!(log_grid().first(), Some(&10));
        assert_eq!(log_grid().last(), Some(&100_000));
    }

    #[test]
    fn paths_by_name_or_object() {
        let p: QuditParams = parse(&map(json!({"path": "qubit-linear-q"}))).unwrap();
        assert_eq!(p.path, PathSpec::QubitLinearQ(LinearQ::default()));
        let p: QuditParams = parse(&map(json!({"path": {"qubit-gap-ramp": {"e1": 3.0}}}))).unwrap();
        assert_eq!(
            p.path,
            PathSpec::QubitGapRamp(GapRamp {
                e1: 3.0,
                ..GapRamp::default()
            })
        );
        let p: QuditParams = parse(&map(json!({"path": {"endpoint-pair": {
            "h0": [[0.0, 0.0], [0.0, 1.0]],
            "h1": [[0.0, [0.2, 0.1]], [[0.2, -0.1], 2.0]]
        }}})))
        .unwrap();
        let h = match &p.path {
            PathSpec::EndpointPair(e) => e.h1.hamiltonian().unwrap(),
            _ => unreachable!(),
        };
        assert_eq!(h.matrix()[(0, 1)], Complex::new(0.2, 0.1));
    }

    #[test]
    fn misspelled_keys_report_their_path() {
        let err = parse::<Fig3Params>(&map(json!({"alpah": 0.5}))).unwrap_err();
        assert!(err.to_string().contains("alpah"), "{err}");
        let err = parse::<QuditParams>(&map(json!({"path": {"qubit-gap-ramp": {"e2": 1.0}}}))).unwrap_err();
        match err {
            CliError::Config { path, .. } => assert_eq!(path, "parameters.path.qubit-gap-ramp.e2"),
            other => panic!("{other}"),
        }
        assert!(parse::<QuditParams>(&map(json!({"path": "spiral"}))).is_err());
    }

    #[test]
    fn custom_requires_protocol_fields() {
        assert!(parse::<CustomParams>(&Map::new()).is_err());
        let p: CustomParams = parse(&map(json!({"n": 5, "noise": {"fixed": {"alpha": 0.2}}}))).unwrap();
        assert_eq!(p.schedule, ScheduleSpec::Canonical);
        assert_eq!(p.bins, 60);
    }
}
