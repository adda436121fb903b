//! Content-addressed output directories, CSV/JSON artifacts and run manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// One named pass/fail check inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// A table written as CSV: a header row and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(name: impl Into<String>, header: Vec<String>) -> Self {
        Self { name: name.into(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(CliError::NonFinite(format!("{}: value {v}", self.name)));
            }
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).map_err(|e| CliError::Io(e.to_string()))
    }
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Outcome status of one experiment run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Pass,
    Fail,
    #[serde(rename = "skipped: cap")]
    SkippedCap,
}

/// Everything an experiment produces before it is written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
    pub status: RunStatus,
}

impl Outcome {
    pub fn new(report: Value, tables: Vec<Table>, assertions: Vec<Assertion>) -> Self {
        let status = if assertions.iter().all(|a| a.pass) { RunStatus::Pass } else { RunStatus::Fail };
        Self { report, tables, assertions, status }
    }

    pub fn skipped_cap(detail: String) -> Self {
        Self {
            report: serde_json::json!({ "skipped": detail }),
            tables: Vec::new(),
            assertions: Vec::new(),
            status: RunStatus::SkippedCap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub mflab: String,
}

/// Written last as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub status: RunStatus,
    pub artifacts: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub versions: Versions,
    pub wall_clock_seconds: f64,
}

/// sha256 of the canonical JSON of `value`, hex encoded.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String, CliError> {
    let canonical = serde_json::to_vec(&serde_json::to_value(value).map_err(io)?).map_err(io)?;
    Ok(hex::encode(Sha256::digest(&canonical)))
}

/// Every number finite and no nulls. Optional fields are omitted rather than
/// null in reports, so a null can only be a non-finite float.
pub fn check_finite(value: &Value, path: &str) -> Result<(), CliError> {
    match value {
        Value::Null => Err(CliError::NonFinite(if path.is_empty() { "<root>".into() } else { path.into() })),
        Value::Number(n) if n.as_f64().is_some_and(|v| !v.is_finite()) => Err(CliError::NonFinite(path.into())),
        Value::Array(items) => items.iter().enumerate().try_for_each(|(i, v)| check_finite(v, &format!("{path}[{i}]"))),
        Value::Object(map) => map.iter().try_for_each(|(k, v)| check_finite(v, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Value, CliError> {
    let v = serde_json::to_value(value).map_err(io)?;
    check_finite(&v, "")?;
    Ok(v)
}

/// Writes the outcome to `<out>/<experiment>-<hash prefix>/` and returns the manifest.
pub fn write_outcome(
    out: &Path,
    experiment: &str,
    hash: &str,
    outcome: &Outcome,
    wall_clock_seconds: f64,
) -> Result<(PathBuf, RunManifest), CliError> {
    check_finite(&outcome.report, "report")?;
    let dir = out.join(format!("{experiment}-{}", &hash[..16]));
    std::fs::create_dir_all(&dir).map_err(io)?;
    let mut artifacts = Vec::new();
    let report = serde_json::to_string_pretty(&outcome.report).map_err(io)? + "\n";
    std::fs::write(dir.join("report.json"), report).map_err(io)?;
    artifacts.push("report.json".to_string());
    for t in &outcome.tables {
        let name = format!("{}.csv", t.name);
        std::fs::write(dir.join(&name), t.to_csv()?).map_err(io)?;
        artifacts.push(name);
    }
    let manifest = RunManifest {
        experiment: experiment.to_string(),
        config_hash: hash.to_string(),
        status: outcome.status.clone(),
        artifacts,
        assertions: outcome.assertions.clone(),
        versions: Versions { mflab: env!("CARGO_PKG_VERSION").to_string() },
        wall_clock_seconds,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(io)? + "\n";
    std::fs::write(dir.join("manifest.json"), text).map_err(io)?;
    Ok((dir, manifest))
}
