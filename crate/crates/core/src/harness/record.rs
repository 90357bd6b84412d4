//! Persisted results: one JSON document plus CSV sidecars.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::HarnessError;

pub const RECORD_FILE: &str = "record.json";
pub const REPLICATES_FILE: &str = "replicates.csv";

/// Column-major friendly numeric table with a mandatory header.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Shortest round-trip formatting, so equal values give equal bytes.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_value(*v)))?;
        }
        w.into_inner()
            .map_err(|e| HarnessError::Report(format!("flushing CSV buffer: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let bytes = self.to_csv_bytes()?;
        std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_path(path)?;
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|e| {
                        HarnessError::Report(format!("{}: bad value {s:?}: {e}", path.display()))
                    })
                })
                .collect::<Result<_, _>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

pub(crate) fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub version: String,
    pub elapsed_seconds: f64,
    /// One row per replicate.
    pub replicates: Table,
    /// Plot-ready curves, each written to `<name>.csv`.
    pub curves: BTreeMap<String, Table>,
    pub aggregates: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn aggregate(&self, name: &str) -> Option<f64> {
        self.aggregates.get(name).copied()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Writes every file into memory first, then to disk, so a serialisation
    /// failure never leaves a partial record behind.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        files.push((dir.join(RECORD_FILE), json));
        files.push((dir.join(REPLICATES_FILE), self.replicates.to_csv_bytes()?));
        for (name, table) in &self.curves {
            files.push((dir.join(format!("{name}.csv")), table.to_csv_bytes()?));
        }
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut written = Vec::with_capacity(files.len());
        for (path, bytes) in files {
            std::fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }

    /// Accepts either a record file or the directory holding one.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let file = if path.is_dir() {
            path.join(RECORD_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&file).map_err(|e| HarnessError::io(&file, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
