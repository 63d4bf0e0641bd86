//! File ingestion and emission: CSV tables and NumPy `.npy` matrices.

mod csv_io;
mod npy;

pub use csv_io::{load_csv, select_columns, write_csv, ColumnSelector, CsvTable};
pub use npy::{read_npy, write_npy};

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Load a 2-D matrix from a path, dispatching on the `.npy` extension
/// (everything else is treated as CSV). Returns the matrix and, for CSV,
/// the selected column names.
pub fn load_matrix(path: &Path, selector: &ColumnSelector) -> Result<(Array2<f64>, Option<Vec<String>>)> {
    let is_npy = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("npy"))
        .unwrap_or(false);
    if is_npy {
        Ok((read_npy(path)?, None))
    } else {
        let table = load_csv(path)?;
        let (matrix, names) = select_columns(&table, selector)?;
        if matrix.ncols() == 0 {
            return Err(Error::Parse(format!(
                "no columns selected from {}",
                path.display()
            )));
        }
        Ok((matrix, Some(names)))
    }
}
