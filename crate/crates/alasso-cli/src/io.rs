//! CSV ingestion and emission, plus file checksums for manifests.

use std::path::Path;

use sha2::{Digest, Sha256};

use alasso::numerics::Matrix;
use alasso::Dataset;

use crate::error::{CliError, Result};

/// A parsed CSV: named covariate columns and the response pulled out.
pub struct Table {
    pub covariate_names: Vec<String>,
    pub response_name: String,
    pub dataset: Dataset,
}

impl Table {
    /// Resolves a coordinate given on the command line: a 0-based column
    /// index, or a covariate header name.
    pub fn resolve_coordinate(&self, given: &str) -> Result<usize> {
        if let Ok(j) = given.parse::<usize>() {
            if j < self.covariate_names.len() {
                return Ok(j);
            }
        }
        self.covariate_names
            .iter()
            .position(|n| n == given)
            .ok_or_else(|| CliError::UnknownCoordinate(given.to_string()))
    }
}

/// Reads a headered CSV, splitting off the named response column; every
/// remaining column becomes a covariate in header order.
pub fn read_table(path: &Path, response: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, path))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, path))?
        .iter()
        .map(str::to_string)
        .collect();
    let response_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| CliError::MissingResponseColumn(response.to_string()))?;
    let covariate_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != response_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, path))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(CliError::MalformedCsv {
                line,
                detail: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (i, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| CliError::NonNumericCell {
                line,
                column: headers[i].clone(),
                value: field.to_string(),
            })?;
            if i == response_idx {
                y.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    let x = Matrix::from_rows(&rows)?;
    Ok(Table {
        covariate_names,
        response_name: response.to_string(),
        dataset: Dataset::new(x, y)?,
    })
}

fn csv_error(e: csv::Error, path: &Path) -> CliError {
    if let csv::ErrorKind::Io(_) = e.kind() {
        // Surface file-system problems (missing file, permissions) as such.
        return CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        };
    }
    CliError::MalformedCsv {
        line: e.position().map_or(0, |p| p.line()),
        detail: e.to_string(),
    }
}

/// Decimal rendering with 17 significant digits: enough for every f64 to
/// round-trip exactly through write-then-read.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes selected covariate columns plus the response back to CSV, in
/// the order given.
pub fn render_csv(table: &Table, keep: &[usize]) -> String {
    let mut out = String::new();
    for &j in keep {
        out.push_str(&table.covariate_names[j]);
        out.push(',');
    }
    out.push_str(&table.response_name);
    out.push('\n');
    let data = &table.dataset;
    for i in 0..data.n() {
        for &j in keep {
            out.push_str(&format_f64(data.x().get(i, j)));
            out.push(',');
        }
        out.push_str(&format_f64(data.y()[i]));
        out.push('\n');
    }
    out
}

/// SHA-256 of a byte slice, lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_rendering_round_trips() {
        for &v in &[0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 97f64.powf(0.25)] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn checksums_are_stable() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
