//! Raw observation blocks.

use ndarray::Array2;

use crate::error::{Error, Result};

/// An n×k block of raw observations (one block each for X, Y, and
/// optionally Z). All entries are finite and n >= 3.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if n < 3 {
            return Err(Error::shape(format!(
                "need at least 3 observations, got {n}"
            )));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::domain(format!(
                    "non-finite entry {v} at row {i}, column {j}"
                )));
            }
        }
        Ok(DataMatrix { values })
    }

    /// Build from row-major rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(n * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::shape(format!(
                    "row {i} has {} columns, expected {k}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        let values = Array2::from_shape_vec((n, k), flat)
            .map_err(|e| Error::shape(e.to_string()))?;
        DataMatrix::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// The same data restricted to a subset of rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        let values = self.values.select(ndarray::Axis(0), rows);
        DataMatrix { values }
    }
}
