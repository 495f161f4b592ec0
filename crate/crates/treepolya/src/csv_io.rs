//! Count matrices and numeric tables as CSV.
//!
//! Input files have a header row of column names followed by rows of
//! nonnegative integers, separated by commas.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use treepolya_core::CountMatrix;

use crate::error::{CliError, Result};

/// Read a count matrix from a CSV file.
pub fn load_counts_csv(path: impl AsRef<Path>) -> Result<CountMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_counts(file).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Read a count matrix from CSV text.
pub fn read_counts<R: Read>(reader: R) -> Result<CountMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    if names.iter().any(String::is_empty) {
        return Err(CliError::Parse("empty column name in header".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        let row = record
            .iter()
            .zip(&names)
            .map(|(cell, name)| {
                cell.parse::<u64>().map_err(|_| {
                    CliError::Parse(format!(
                        "line {line}, column '{name}': '{cell}' is not a nonnegative integer"
                    ))
                })
            })
            .collect::<Result<Vec<u64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Parse("no data rows".into()));
    }
    Ok(CountMatrix::new(names, rows)?)
}

fn csv_error(e: csv::Error) -> CliError {
    let at = e.position().map(|p| format!("line {}: ", p.line())).unwrap_or_default();
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            CliError::Parse(format!("{at}row has {len} fields, expected {expected_len}"))
        }
        _ => CliError::Parse(format!("{at}{e}")),
    }
}

/// Write rows of counts under a header.
pub fn write_counts<'a, W: Write>(out: W, names: &[String], rows: impl IntoIterator<Item = &'a [u64]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(names).map_err(write_error)?;
    for row in rows {
        w.write_record(row.iter().map(u64::to_string)).map_err(write_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a labelled square matrix: a header of names and one named row each.
pub fn write_matrix<W: Write>(out: W, names: &[String], matrix: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("").chain(names.iter().map(String::as_str))).map_err(write_error)?;
    for (name, row) in names.iter().zip(matrix) {
        w.write_record(std::iter::once(name.clone()).chain(row.iter().map(f64::to_string)))
            .map_err(write_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::from(io),
        other => CliError::Parse(format!("{other:?}")),
    }
}
