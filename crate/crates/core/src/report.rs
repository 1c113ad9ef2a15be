//! Experiment reports, CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Error;

/// One measured quantity, optionally paired with an analytic prediction or
/// a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub measured: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    /// Relative tolerance for predictions, or the bound itself for limits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Metric {
    pub fn info(measured: f64) -> Self {
        Self { measured, predicted: None, relative_error: None, tolerance: None, pass: None, note: None }
    }

    /// `|measured - predicted| / |predicted| <= tol`.
    pub fn relative(measured: f64, predicted: f64, tol: f64) -> Self {
        let err = (measured - predicted).abs() / predicted.abs();
        Self {
            measured,
            predicted: Some(predicted),
            relative_error: Some(err),
            tolerance: Some(tol),
            pass: Some(err <= tol),
            note: None,
        }
    }

    /// Passes when `measured < bound`.
    pub fn below(measured: f64, bound: f64) -> Self {
        Self { tolerance: Some(bound), pass: Some(measured < bound), ..Self::info(measured) }
    }

    /// Passes when `measured > bound`.
    pub fn above(measured: f64, bound: f64) -> Self {
        Self { tolerance: Some(bound), pass: Some(measured > bound), ..Self::info(measured) }
    }

    /// Passes when `lo <= measured <= hi`.
    pub fn within(measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            pass: Some((lo..=hi).contains(&measured)),
            note: Some(format!("accepted range [{lo}, {hi}]")),
            ..Self::info(measured)
        }
    }

    pub fn flag(pass: bool, note: impl Into<String>) -> Self {
        Self { pass: Some(pass), note: Some(note.into()), ..Self::info(if pass { 1.0 } else { 0.0 }) }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.pass != Some(false)
    }
}

/// Columnar numeric table written as CSV next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Echo of the scaled configuration that produced the report.
    pub parameters: serde_json::Value,
    pub metrics: BTreeMap<String, Metric>,
    pub warnings: Vec<String>,
    /// Set when a measurement could not be made (failed fit, pulse left the medium).
    pub inconclusive: bool,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, parameters: serde_json::Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            parameters,
            metrics: BTreeMap::new(),
            warnings: Vec::new(),
            inconclusive: false,
            artifacts: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn insert(&mut self, name: &str, m: Metric) {
        self.metrics.insert(name.to_string(), m);
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.get(name)
    }

    pub fn mark_inconclusive(&mut self, why: impl Into<String>) {
        self.inconclusive = true;
        self.warnings.push(why.into());
    }

    pub fn passed(&self) -> bool {
        !self.inconclusive && self.metrics.values().all(Metric::passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write every table as `<name>.csv` and the report as `report.json`.
    pub fn write(&mut self, dir: &Path) -> Result<Vec<PathBuf>, Error> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::new();
        self.artifacts = self.tables.iter().map(|t| format!("{}.csv", t.name)).collect();
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            fs::write(&p, t.to_csv()).map_err(|e| io(&p, e))?;
            written.push(p);
        }
        let p = dir.join("report.json");
        fs::write(&p, self.to_json()).map_err(|e| io(&p, e))?;
        written.push(p);
        Ok(written)
    }
}

fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// SHA-256 of the canonical (key-sorted, compact) form of a JSON document.
pub fn config_hash(document: &str) -> Result<String, Error> {
    let v: serde_json::Value = serde_json::from_str(document)?;
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&v)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub started_unix: f64,
    pub wall_seconds: f64,
}

/// Everything about a run that is not part of the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub command: String,
    pub artifacts: Vec<Artifact>,
    pub timing: Timing,
}

impl RunManifest {
    pub fn new(command: &str, config_sha256: String, timing: Timing) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            command: command.to_string(),
            artifacts: Vec::new(),
            timing,
        }
    }

    /// Record files relative to `root`, sorted by path.
    pub fn add_files(&mut self, root: &Path, files: &[PathBuf]) -> Result<(), Error> {
        for f in files {
            let data = fs::read(f).map_err(|e| io(f, e))?;
            let rel = f.strip_prefix(root).unwrap_or(f);
            self.artifacts.push(Artifact {
                path: rel.to_string_lossy().into_owned(),
                bytes: data.len() as u64,
                sha256: hex::encode(Sha256::digest(&data)),
            });
        }
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, Error> {
        let p = dir.join("manifest.json");
        let mut f = fs::File::create(&p).map_err(|e| io(&p, e))?;
        f.write_all(serde_json::to_string_pretty(self)?.as_bytes()).map_err(|e| io(&p, e))?;
        Ok(p)
    }
}
