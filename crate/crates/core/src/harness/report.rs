//! Side-by-side comparison of run records of one kind.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use super::config::ExperimentKind;
use super::record::{format_value, RunRecord};
use super::HarnessError;

/// Metrics as rows, one column per record. Missing entries are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub kind: ExperimentKind,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

/// Metrics listed first for each kind; everything else follows by name.
fn headline(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::VerifyTail => &[
            "threshold",
            "bound",
            "violation_frequency",
            "tolerance",
            "expectation_bound",
            "mean_selected_true_mean",
        ],
        ExperimentKind::HoldoutAdapt => &["slope", "oracle_slope"],
        ExperimentKind::Calibrate => &["jump_alpha", "optimal_alpha", "ratio"],
        ExperimentKind::AkaikeCheck => &[],
        ExperimentKind::Segment => &["recovery_rate", "jump_alpha"],
    }
}

pub fn report(paths: &[PathBuf]) -> Result<ReportTable, HarnessError> {
    let records = paths
        .iter()
        .map(|p| RunRecord::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let columns = paths.iter().map(|p| column_name(p)).collect();
    report_records(&records, columns)
}

fn column_name(path: &Path) -> String {
    let p = if path
        .file_name()
        .is_some_and(|f| f == super::record::RECORD_FILE)
    {
        path.parent().unwrap_or(path)
    } else {
        path
    };
    p.display().to_string()
}

pub fn report_records(
    records: &[RunRecord],
    columns: Vec<String>,
) -> Result<ReportTable, HarnessError> {
    let first = records
        .first()
        .ok_or_else(|| HarnessError::Report("no records given".into()))?;
    let kind = first.kind;
    if let Some(other) = records.iter().find(|r| r.kind != kind) {
        return Err(HarnessError::Report(format!(
            "mixed experiment kinds: {kind} and {}",
            other.kind
        )));
    }
    let mut names: Vec<String> = headline(kind)
        .iter()
        .filter(|k| records.iter().any(|r| r.aggregates.contains_key(**k)))
        .map(|k| k.to_string())
        .collect();
    let rest: BTreeSet<&String> = records
        .iter()
        .flat_map(|r| r.aggregates.keys())
        .filter(|k| !names.contains(k))
        .collect();
    names.extend(rest.into_iter().cloned());

    let mut rows: Vec<(String, Vec<Option<f64>>)> = vec![
        (
            "seed".into(),
            records.iter().map(|r| Some(r.config.seed as f64)).collect(),
        ),
        (
            "replicates".into(),
            records
                .iter()
                .map(|r| Some(r.config.replicates as f64))
                .collect(),
        ),
    ];
    for name in names {
        let values = records.iter().map(|r| r.aggregate(&name)).collect();
        rows.push((name, values));
    }
    rows.push((
        "checks_passed".into(),
        records
            .iter()
            .map(|r| Some(if r.passed() { 1.0 } else { 0.0 }))
            .collect(),
    ));
    Ok(ReportTable {
        kind,
        columns,
        rows,
    })
}

impl ReportTable {
    pub fn value(&self, metric: &str, column: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|(m, _)| m == metric)
            .and_then(|(_, v)| v.get(column).copied().flatten())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (metric, values) in &self.rows {
            let mut rec = vec![metric.clone()];
            rec.extend(
                values
                    .iter()
                    .map(|v| v.map(format_value).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.into_inner()
            .map_err(|e| HarnessError::Report(format!("flushing CSV buffer: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let bytes = self.to_csv_bytes()?;
        std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
    }
}

impl fmt::Display for ReportTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(_, v)| {
                v.iter()
                    .map(|x| x.map_or_else(|| "-".to_string(), |x| format!("{x:.6}")))
                    .collect()
            })
            .collect();
        let w0 = self
            .rows
            .iter()
            .map(|(m, _)| m.len())
            .max()
            .unwrap_or(0)
            .max(6);
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                cells
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.columns[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        writeln!(f, "# {}", self.kind)?;
        write!(f, "{:<w0$}", "metric")?;
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(f, "  {c:>w$}")?;
        }
        writeln!(f)?;
        for ((metric, _), row) in self.rows.iter().zip(&cells) {
            write!(f, "{metric:<w0$}")?;
            for (v, w) in row.iter().zip(&widths) {
                write!(f, "  {v:>w$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::harness::record::Table;
    use std::collections::BTreeMap;

    fn record(kind: ExperimentKind, seed: u64, jump: f64) -> RunRecord {
        RunRecord {
            kind,
            config: ExperimentConfig::new(kind, seed, 5),
            version: "0".into(),
            elapsed_seconds: 0.0,
            replicates: Table::new(["replicate"]),
            curves: BTreeMap::new(),
            aggregates: BTreeMap::from([
                ("jump_alpha".to_string(), jump),
                ("zeta".to_string(), 2.0),
            ]),
            checks: vec![],
        }
    }

    #[test]
    fn single_record_passes_through() {
        let r = record(ExperimentKind::Calibrate, 1, 0.9);
        let t = report_records(std::slice::from_ref(&r), vec!["a".into()]).unwrap();
        for (k, v) in &r.aggregates {
            assert_eq!(t.value(k, 0), Some(*v));
        }
        assert_eq!(t.rows[2].0, "jump_alpha");
    }

    #[test]
    fn side_by_side_columns() {
        let rs = [
            record(ExperimentKind::Calibrate, 1, 0.9),
            record(ExperimentKind::Calibrate, 2, 1.1),
        ];
        let t = report_records(&rs, vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(t.value("jump_alpha", 0), Some(0.9));
        assert_eq!(t.value("jump_alpha", 1), Some(1.1));
        let csv = String::from_utf8(t.to_csv_bytes().unwrap()).unwrap();
        assert!(csv.starts_with("metric,a,b\nseed,1.0,2.0\n"));
        assert!(t.to_string().contains("jump_alpha"));
    }

    #[test]
    fn mixed_kinds_rejected() {
        let rs = [
            record(ExperimentKind::Calibrate, 1, 0.9),
            record(ExperimentKind::Segment, 1, 0.9),
        ];
        assert!(matches!(
            report_records(&rs, vec!["a".into(), "b".into()]),
            Err(HarnessError::Report(_))
        ));
    }
}
