//! CSV ingestion: comma-separated, UTF-8, '.' decimal, with an optional
//! header row detected by a non-numeric first record. Errors carry 1-based
//! row/column locations.

use gausstest::DataMatrix;
use ndarray::Array2;

use crate::CliError;

/// A parsed numeric table.
#[derive(Debug, Clone)]
pub struct NumericTable {
    pub values: Vec<Vec<f64>>,
    pub width: usize,
    /// True when the first row was non-numeric and skipped.
    pub had_header: bool,
}

impl NumericTable {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

pub fn read_csv(path: &std::path::Path) -> Result<NumericTable, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    let mut had_header = false;

    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("CSV parse failure: {e}")))?;
        let row_no = idx + 1;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, (usize, String)> = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .map_err(|_| (j + 1, cell.to_string()))
            })
            .collect();
        match parsed {
            Ok(row) => {
                if values.is_empty() && !had_header {
                    width = row.len();
                } else if row.len() != width {
                    return Err(CliError::Data(format!(
                        "ragged CSV: row {row_no} has {} columns, expected {width}",
                        row.len()
                    )));
                }
                values.push(row);
            }
            Err((col, cell)) => {
                if idx == 0 {
                    // Non-numeric first row is the header.
                    had_header = true;
                    width = record.len();
                } else {
                    return Err(CliError::Data(format!(
                        "non-numeric cell '{cell}' at row {row_no}, column {col}"
                    )));
                }
            }
        }
    }

    if values.is_empty() {
        return Err(CliError::Data("no data rows in CSV (n=0)".into()));
    }
    Ok(NumericTable {
        values,
        width,
        had_header,
    })
}

/// 1-based inclusive column ranges, e.g. "1-3", "5", "1-2,7-8".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRanges(pub Vec<(usize, usize)>);

impl std::str::FromStr for ColumnRanges {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut ranges = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(format!("empty range in '{s}'"));
            }
            let (a, b) = match part.split_once('-') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (part, part),
            };
            let a: usize = a.parse().map_err(|_| format!("bad column index '{a}'"))?;
            let b: usize = b.parse().map_err(|_| format!("bad column index '{b}'"))?;
            if a == 0 || b < a {
                return Err(format!("range '{part}' must be 1-based with start <= end"));
            }
            ranges.push((a, b));
        }
        Ok(ColumnRanges(ranges))
    }
}

impl ColumnRanges {
    /// Expand to 0-based column indices in range order.
    pub fn indices(&self) -> Vec<usize> {
        self.0
            .iter()
            .flat_map(|&(a, b)| (a - 1)..b)
            .collect()
    }
}

/// Extract the given columns into a DataMatrix, validating bounds.
pub fn extract_block(
    table: &NumericTable,
    ranges: &ColumnRanges,
    name: &str,
) -> Result<DataMatrix, CliError> {
    let cols = ranges.indices();
    for &c in &cols {
        if c >= table.width {
            return Err(CliError::Config(format!(
                "{name} column {} exceeds CSV width {}",
                c + 1,
                table.width
            )));
        }
    }
    let n = table.n();
    let mut m = Array2::zeros((n, cols.len()));
    for (i, row) in table.values.iter().enumerate() {
        for (jj, &c) in cols.iter().enumerate() {
            m[[i, jj]] = row[c];
        }
    }
    DataMatrix::new(m).map_err(CliError::from)
}

/// Ensure the x/y/z assignments do not overlap.
pub fn check_disjoint(blocks: &[(&str, &ColumnRanges)]) -> Result<(), CliError> {
    let mut seen: std::collections::HashMap<usize, &str> = std::collections::HashMap::new();
    for (name, ranges) in blocks {
        for c in ranges.indices() {
            if let Some(prev) = seen.insert(c, name) {
                return Err(CliError::Config(format!(
                    "column {} assigned to both {prev} and {name}",
                    c + 1
                )));
            }
        }
    }
    Ok(())
}
