//! Count-series ingestion.
//!
//! A data file is either one count per line with an optional header line, or
//! delimited text (comma, tab or semicolon) from which `--column` picks a
//! named column. UTF-8 with LF or CRLF line endings; blank lines are skipped.

use std::path::Path;

use setpar::CountSeries;

use crate::error::{CliError, CliResult};

pub fn read_counts(path: &Path, column: Option<&str>) -> CliResult<CountSeries> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_counts(&bytes, column).map_err(|e| match e {
        CliError::Input(msg) => CliError::input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn sniff_delimiter(text: &[u8]) -> u8 {
    let first = text.split(|&b| b == b'\n').next().unwrap_or_default();
    b",\t;".iter().copied().find(|d| first.contains(d)).unwrap_or(b',')
}

pub fn parse_counts(bytes: &[u8], column: Option<&str>) -> CliResult<CountSeries> {
    let bytes = bytes.strip_prefix(b"\xef\xbb\xbf").unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(sniff_delimiter(bytes))
        .from_reader(bytes);
    let mut index = None;
    let mut values = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("malformed record: {e}")))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let idx = match index {
            Some(i) => i,
            None => {
                let header = match column {
                    Some(name) => {
                        let i = record.iter().position(|f| f == name).ok_or_else(|| {
                            CliError::input(format!("line {line}: no column named `{name}` in the header"))
                        })?;
                        index = Some(i);
                        true
                    }
                    None if record.len() > 1 => {
                        return Err(CliError::input(format!(
                            "line {line}: {} fields per record; name the count column with --column",
                            record.len()
                        )));
                    }
                    None => {
                        index = Some(0);
                        record[0].parse::<u64>().is_err() && record[0].parse::<f64>().is_err()
                    }
                };
                if header {
                    continue;
                }
                0
            }
        };
        let field = record
            .get(idx)
            .ok_or_else(|| CliError::input(format!("line {line}: missing field {}", idx + 1)))?;
        let v = field
            .parse::<u64>()
            .map_err(|_| CliError::input(format!("line {line}: `{field}` is not a nonnegative integer count")))?;
        values.push(v);
    }
    CountSeries::new(values).map_err(|_| CliError::input("no counts found"))
}
