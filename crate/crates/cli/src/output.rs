//! Tables, their CSV/JSON encodings and the run manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::sha256_hex;
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    /// Floats use 17 significant digits so values round-trip exactly.
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_nan() => "nan".into(),
            Cell::Float(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    /// Non-finite floats become `null`.
    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// An array of records keyed by column name.
    pub fn to_json(&self) -> Value {
        let records = self
            .rows
            .iter()
            .map(|row| {
                let map: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                Value::Object(map)
            })
            .collect();
        Value::Array(records)
    }
}

/// One output of an experiment, before it is written.
#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    Table { stem: String, table: Table },
    Document { stem: String, value: Value },
}

impl Artifact {
    pub fn table(stem: impl Into<String>, table: Table) -> Self {
        Artifact::Table { stem: stem.into(), table }
    }

    pub fn document(stem: impl Into<String>, value: Value) -> Self {
        Artifact::Document { stem: stem.into(), value }
    }

    pub fn stem(&self) -> &str {
        match self {
            Artifact::Table { stem, .. } | Artifact::Document { stem, .. } => stem,
        }
    }

    fn encode(&self, format: Format) -> (String, String, usize) {
        match (self, format) {
            (Artifact::Table { stem, table }, Format::Csv) => (format!("{stem}.csv"), table.to_csv(), table.rows.len()),
            (Artifact::Table { stem, table }, Format::Json) => {
                (format!("{stem}.json"), pretty(&table.to_json()), table.rows.len())
            }
            (Artifact::Document { stem, value }, _) => {
                let rows = value.as_array().map_or(1, Vec::len);
                (format!("{stem}.json"), pretty(value), rows)
            }
        }
    }
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

/// Concatenates sweep row groups stem by stem. A document produced by
/// more than one group becomes an array of the per-group documents.
pub fn merge_row_groups(groups: Vec<Vec<Artifact>>) -> Vec<Artifact> {
    let mut out: Vec<Artifact> = Vec::new();
    let mut seen_twice: Vec<String> = Vec::new();
    for group in groups {
        for art in group {
            match out.iter_mut().find(|a| a.stem() == art.stem()) {
                None => out.push(art),
                Some(Artifact::Table { table, .. }) => {
                    if let Artifact::Table { table: t, .. } = art {
                        table.rows.extend(t.rows);
                    }
                }
                Some(Artifact::Document { stem, value }) => {
                    if let Artifact::Document { value: v, .. } = art {
                        if !seen_twice.contains(stem) {
                            seen_twice.push(stem.clone());
                            *value = Value::Array(vec![value.take()]);
                        }
                        value.as_array_mut().expect("gathered").push(v);
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub filename: String,
    pub row_count: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub experiment: String,
    pub master_seed: u64,
    pub outputs: Vec<OutputEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes every artifact plus `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    artifacts: &[Artifact],
    format: Format,
    mut manifest: RunManifest,
) -> CliResult<RunManifest> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    manifest.outputs.clear();
    for art in artifacts {
        let (filename, body, row_count) = art.encode(format);
        let path = dir.join(&filename);
        std::fs::write(&path, body.as_bytes()).map_err(io_err(&path))?;
        manifest.outputs.push(OutputEntry {
            filename,
            row_count,
            sha256: sha256_hex(body.as_bytes()),
        });
    }
    let path = dir.join(MANIFEST_FILE);
    let body = pretty(&serde_json::to_value(&manifest).expect("manifest serializes"));
    std::fs::write(&path, body).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Re-hashes every listed output; returns the names that do not match.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .outputs
        .iter()
        .filter(|o| {
            std::fs::read(dir.join(&o.filename))
                .map(|bytes| sha256_hex(&bytes) != o.sha256)
                .unwrap_or(true)
        })
        .map(|o| o.filename.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_cells() {
        let mut t = Table::new(&["N", "x", "label"]);
        t.push(vec![10usize.into(), 0.1.into(), "a,b".into()]);
        t.push(vec![20usize.into(), f64::INFINITY.into(), "c".into()]);
        assert_eq!(t.to_csv(), "N,x,label\n10,1.0000000000000001e-1,\"a,b\"\n20,inf,c\n");
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300] {
            let s = Cell::Float(v).csv();
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn merging_concatenates_rows() {
        let mut a = Table::new(&["k"]);
        a.push(vec![1usize.into()]);
        let mut b = Table::new(&["k"]);
        b.push(vec![2usize.into()]);
        let merged = merge_row_groups(vec![
            vec![Artifact::table("t", a.clone()), Artifact::document("d", Value::from(1))],
            vec![Artifact::table("t", b), Artifact::document("d", Value::from(2))],
        ]);
        match &merged[0] {
            Artifact::Table { table, .. } => assert_eq!(table.rows.len(), 2),
            _ => unreachable!(),
        }
        assert_eq!(merged[1], Artifact::document("d", serde_json::json!([1, 2])));
        let single = merge_row_groups(vec![vec![Artifact::table("t", a.clone())]]);
        assert_eq!(single, vec![Artifact::table("t", a)]);
    }
}
