use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// A parsed CSV file: header row plus a numeric matrix of all columns.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub data: Array2<f64>,
}

/// Which columns of a CSV table to pick.
#[derive(Debug, Clone)]
pub enum ColumnSelector {
    /// Columns whose header starts with the given prefix, in file order;
    /// falls back to all columns when no header matches.
    Prefix(String),
    /// Explicit header names, in the given order.
    Names(Vec<String>),
    /// All columns.
    All,
}

/// Read a UTF-8 CSV file with a required header row. Decimal point `.`,
/// no thousands separators.
pub fn load_csv(path: &Path) -> Result<CsvTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let ncols = headers.len();
    let mut values: Vec<f64> = Vec::new();
    let mut nrows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if record.len() != ncols {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                line + 2,
                record.len(),
                ncols
            )));
        }
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: row {}: cannot parse '{}' as a number",
                    path.display(),
                    line + 2,
                    field
                ))
            })?;
            values.push(v);
        }
        nrows += 1;
    }
    let data = Array2::from_shape_vec((nrows, ncols), values)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(CsvTable { headers, data })
}

/// Select columns from a parsed table, returning them as a matrix together
/// with their header names.
pub fn select_columns(table: &CsvTable, selector: &ColumnSelector) -> Result<(Array2<f64>, Vec<String>)> {
    let cols: Vec<usize> = match selector {
        ColumnSelector::All => (0..table.headers.len()).collect(),
        ColumnSelector::Prefix(prefix) => {
            let matched: Vec<usize> = table
                .headers
                .iter()
                .enumerate()
                .filter(|(_, h)| h.starts_with(prefix))
                .map(|(i, _)| i)
                .collect();
            if matched.is_empty() {
                (0..table.headers.len()).collect()
            } else {
                matched
            }
        }
        ColumnSelector::Names(names) => {
            let mut cols = Vec::with_capacity(names.len());
            for name in names {
                let idx = table
                    .headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Parse(format!("no CSV column named '{name}'")))?;
                cols.push(idx);
            }
            cols
        }
    };
    let names = cols.iter().map(|&c| table.headers[c].clone()).collect();
    let matrix = Array2::from_shape_fn((table.data.nrows(), cols.len()), |(r, j)| {
        table.data[(r, cols[j])]
    });
    Ok((matrix, names))
}

/// Write a matrix as CSV with the given header names.
pub fn write_csv(path: &Path, headers: &[String], data: &Array2<f64>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    writer
        .write_record(headers)
        .map_err(|e| Error::Parse(e.to_string()))?;
    for row in data.rows() {
        let fields: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        writer
            .write_record(&fields)
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        // shortest round-trip representation
        format!("{v}")
    }
}
