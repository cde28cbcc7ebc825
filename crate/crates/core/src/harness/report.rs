use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::{EntryDiagnostics, SweepConfig, SweepFailure};
use crate::error::{Error, Result};
use crate::fractional::LimitConstants;
use crate::vector::Vec2;

/// Column names of the report CSV, in order.
pub const COLUMNS: [&str; 5] = ["epsilon", "rel_l2_error", "mass_drift", "micro_residual", "wall_time_s"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub epsilon: f64,
    pub rel_l2_error: f64,
    pub mass_drift: f64,
    pub micro_residual: f64,
    pub wall_time_s: f64,
}

/// Everything needed to reproduce a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub package: &'static str,
    pub version: &'static str,
    pub sweep: Option<SweepConfig>,
    pub constants: Option<LimitConstants>,
    pub drift: Option<Vec2>,
}

impl ReportMetadata {
    pub fn new(sweep: &SweepConfig, constants: LimitConstants, drift: Vec2) -> Self {
        ReportMetadata {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            sweep: Some(sweep.clone()),
            constants: Some(constants),
            drift: Some(drift),
        }
    }

    pub fn empty() -> Self {
        ReportMetadata {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            sweep: None,
            constants: None,
            drift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Ordered as the sweep's ε list.
    pub rows: Vec<ReportRow>,
    /// Slope of log error against log ε; absent below three rows.
    pub fitted_rate: Option<f64>,
    pub metadata: ReportMetadata,
    pub diagnostics: Vec<EntryDiagnostics>,
    pub failures: Vec<SweepFailure>,
}

impl ConvergenceReport {
    pub fn empty() -> Self {
        ConvergenceReport {
            rows: Vec::new(),
            fitted_rate: None,
            metadata: ReportMetadata::empty(),
            diagnostics: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rel_l2_error).collect()
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    metadata: &'a ReportMetadata,
    fitted_rate: Option<f64>,
    partial: bool,
    failures: &'a [SweepFailure],
    diagnostics: &'a [EntryDiagnostics],
}

/// `report.csv` → `report.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, e.into())
}

/// Writes the CSV (header always present) and the JSON metadata sidecar.
/// Returns the sidecar path.
pub fn emit_report(report: &ConvergenceReport, path: &Path) -> Result<PathBuf> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(COLUMNS).map_err(|e| csv_error(path, e))?;
    for row in &report.rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;

    let side = sidecar_path(path);
    let sidecar = Sidecar {
        metadata: &report.metadata,
        fitted_rate: report.fitted_rate,
        partial: report.is_partial(),
        failures: &report.failures,
        diagnostics: &report.diagnostics,
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::io(&side, e.into()))?;
    let mut out = File::create(&side).map_err(|e| Error::io(&side, e))?;
    writeln!(out, "{json}").map_err(|e| Error::io(&side, e))?;
    Ok(side)
}

/// Reads the rows of a report CSV, checking the header.
pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(COLUMNS) {
        return Err(Error::Config {
            line: 1,
            key: "header".into(),
            message: format!("expected columns {}", COLUMNS.join(",")),
        });
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Config { line: i + 2, key: "row".into(), message: e.to_string() })
        })
        .collect()
}
