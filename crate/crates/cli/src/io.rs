//! Plain-text data formats.
//!
//! * genotypes: CSV, header row of variant ids, one individual per row;
//! * phenotype: one numeric column, optional header;
//! * covariates: CSV with a header row, one individual per row (an
//!   intercept column is added by the caller).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use polysplit_core::GenotypeMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn parse_number(path: &Path, row: usize, col: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::parse(path, format!("row {row}, column {col}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::parse(path, format!("row {row}, column {col}: non-finite value")));
    }
    Ok(v)
}

/// Header names and row-major values of a numeric CSV with a header row.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(open(path)?);
    let header: Vec<String> =
        reader.headers().map_err(|e| CliError::parse(path, e))?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CliError::parse(path, "missing header row"));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::parse(path, e))?;
        if rec.len() != header.len() {
            return Err(CliError::parse(path, format!("row {} has {} fields, header has {}", i + 1, rec.len(), header.len())));
        }
        let row = rec.iter().enumerate().map(|(j, f)| parse_number(path, i + 1, j + 1, f)).collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::parse(path, "no data rows"));
    }
    Ok((header, rows))
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

pub fn read_genotypes(path: &Path) -> Result<GenotypeMatrix> {
    let (ids, rows) = read_table(path)?;
    Ok(GenotypeMatrix::new(to_matrix(&rows), Some(ids))?)
}

pub fn read_covariates(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let (names, rows) = read_table(path)?;
    Ok((names, to_matrix(&rows)))
}

/// One value per line; a non-numeric first line is taken as a header.
pub fn read_phenotype(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(open(path)?);
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::parse(path, e))?;
        if rec.len() != 1 {
            return Err(CliError::parse(path, format!("line {} has {} fields, expected 1", i + 1, rec.len())));
        }
        let field = rec[0].trim();
        if i == 0 && field.parse::<f64>().is_err() {
            continue;
        }
        values.push(parse_number(path, i + 1, 1, field)?);
    }
    if values.is_empty() {
        return Err(CliError::parse(path, "no phenotype values"));
    }
    Ok(values)
}

pub fn write_genotypes(path: &Path, g: &GenotypeMatrix) -> Result<()> {
    let io_err = |e: csv::Error| CliError::parse(path, e);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(g.variant_ids()).map_err(io_err)?;
    let values = g.values();
    for i in 0..values.nrows() {
        w.write_record(values.row(i).iter().map(|v| v.to_string())).map_err(io_err)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_phenotype(path: &Path, y: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        writeln!(w, "y")?;
        for v in y {
            writeln!(w, "{v}")?;
        }
        w.flush()
    })();
    res.map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::parse(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(std::io::BufReader::new(open(path)?)).map_err(|e| CliError::parse(path, e))
}

/// Write serialisable rows as CSV with a header derived from field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::parse(path, e))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize().map(|rec| rec.map_err(|e| CliError::parse(path, e))).collect()
}
