//! Result document and comma-separated tables.
//!
//! Floats are written in the shortest form that parses back to the same
//! value, so every number round-trips exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use setpar::diagnostics::Moments;
use setpar::estimation::FitResult;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

/// Fitted path and Pearson residuals at the estimate, `t = 1, …, n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSeries {
    pub lambda_hat: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Output of `fit`, read back by `diagnose` and `forecast`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub parameters: Vec<ParameterRow>,
    pub result: FitResult,
    pub residual_moments: Moments,
    pub series: FittedSeries,
    pub manifest: RunManifest,
}

impl FitDocument {
    pub fn parameter_rows(result: &FitResult) -> Vec<ParameterRow> {
        result
            .param_names()
            .iter()
            .enumerate()
            .map(|(i, name)| ParameterRow {
                name: name.to_string(),
                estimate: result.estimates[i],
                std_error: result.std_errors.as_ref().map(|s| s[i]),
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text =
            toml::to_string(self).map_err(|e| CliError::input(format!("cannot encode the fit result: {e}")))?;
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        crate::config::load(path)
    }
}

/// Missing values in tables.
pub const NA: &str = "NA";

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| v.to_string())
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::input(format!("{}: {other:?}", path.display())),
    }
}
