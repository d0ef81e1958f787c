//! The observed `(Y, X, W)` sample and CSV ingestion.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of rows accepted by the estimation commands.
pub const MIN_ESTIMATION_ROWS: usize = 30;

/// Outcome, one or two target covariates, and any number of controls.
/// Columns are stored column-major; every column has length `n()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub y_name: String,
    pub x_names: Vec<String>,
    pub w_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with generated column names (`y`, `x1`, `w1`, ...).
    pub fn new(y: Vec<f64>, x: Vec<Vec<f64>>, w: Vec<Vec<f64>>) -> Result<Self> {
        let x_names = (1..=x.len()).map(|j| format!("x{j}")).collect();
        let w_names = (1..=w.len()).map(|j| format!("w{j}")).collect();
        Self::with_names(y, x, w, "y".into(), x_names, w_names)
    }

    pub fn with_names(
        y: Vec<f64>,
        x: Vec<Vec<f64>>,
        w: Vec<Vec<f64>>,
        y_name: String,
        x_names: Vec<String>,
        w_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if x.is_empty() || x.len() > 2 {
            return Err(Error::WrongTargetCount {
                expected: 1,
                found: x.len(),
            });
        }
        if x_names.len() != x.len() || w_names.len() != w.len() {
            return Err(Error::DimensionMismatch(
                "column names do not match column count".into(),
            ));
        }
        for col in x.iter().chain(w.iter()) {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column of length {} alongside outcome of length {n}",
                    col.len()
                )));
            }
        }
        let all_finite = y
            .iter()
            .chain(x.iter().flatten())
            .chain(w.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            y,
            x,
            w,
            y_name,
            x_names,
            w_names,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_targets(&self) -> usize {
        self.x.len()
    }

    /// Same covariates with `log(y)` as outcome.
    pub fn log_outcome(&self) -> Result<Self> {
        if self.y.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidArgument(
                "log outcome requires a strictly positive outcome".into(),
            ));
        }
        let mut out = self.clone();
        out.y = self.y.iter().map(|v| v.ln()).collect();
        out.y_name = format!("log({})", self.y_name);
        Ok(out)
    }

    /// Moves target `j` into the controls (appended last).
    pub fn demote_target(&self, j: usize) -> Result<Self> {
        if j >= self.x.len() || self.x.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "cannot demote target {j} of {}",
                self.x.len()
            )));
        }
        let mut out = self.clone();
        let col = out.x.remove(j);
        let name = out.x_names.remove(j);
        out.w.push(col);
        out.w_names.push(name);
        Ok(out)
    }

    pub fn check_estimation_size(&self) -> Result<()> {
        if self.n() < MIN_ESTIMATION_ROWS {
            return Err(Error::TooFewRows {
                required: MIN_ESTIMATION_ROWS,
                found: self.n(),
            });
        }
        Ok(())
    }
}

/// Which CSV header names feed the outcome, targets and controls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub y: String,
    pub x: Vec<String>,
    pub w: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub ranges: Vec<ColumnRange>,
}

/// Reads the mapped columns of a headed CSV file.
///
/// Empty cells, `NA`/`NaN` and non-finite values mark a row as missing and the
/// row is dropped and counted. Any other unparsable cell is a hard error that
/// names the row (1-based, header excluded) and the column.
pub fn ingest_csv(path: &Path, mapping: &ColumnMapping) -> Result<(Dataset, LoadReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, mapping)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    mapping: &ColumnMapping,
) -> Result<(Dataset, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();

    let wanted: Vec<&String> = std::iter::once(&mapping.y)
        .chain(mapping.x.iter())
        .chain(mapping.w.iter())
        .collect();
    let cols: Vec<usize> = wanted
        .iter()
        .map(|name| {
            index
                .get(name.as_str())
                .copied()
                .ok_or_else(|| Error::MissingColumn((*name).clone()))
        })
        .collect::<Result<_>>()?;

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    let mut row_buf = vec![0.0; cols.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        rows_read += 1;
        let mut missing = false;
        for (k, &c) in cols.iter().enumerate() {
            let cell = record.get(c).unwrap_or("");
            match parse_cell(cell) {
                Cell::Value(v) => row_buf[k] = v,
                Cell::Missing => missing = true,
                Cell::Invalid => {
                    return Err(Error::Parse {
                        row: r + 1,
                        column: wanted[k].clone(),
                        message: format!("cannot parse {cell:?} as a number"),
                    })
                }
            }
        }
        if missing {
            rows_dropped += 1;
            continue;
        }
        for (col, &v) in values.iter_mut().zip(row_buf.iter()) {
            col.push(v);
        }
    }
    if values[0].is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }

    let ranges = wanted
        .iter()
        .zip(values.iter())
        .map(|(name, col)| ColumnRange {
            name: (*name).clone(),
            min: col.iter().copied().fold(f64::INFINITY, f64::min),
            max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();

    let mut it = values.into_iter();
    let y = it.next().unwrap();
    let x: Vec<Vec<f64>> = it.by_ref().take(mapping.x.len()).collect();
    let w: Vec<Vec<f64>> = it.collect();
    let ds = Dataset::with_names(
        y,
        x,
        w,
        mapping.y.clone(),
        mapping.x.clone(),
        mapping.w.clone(),
    )?;
    Ok((
        ds,
        LoadReport {
            rows_read,
            rows_dropped,
            ranges,
        },
    ))
}

enum Cell {
    Value(f64),
    Missing,
    Invalid,
}

fn parse_cell(cell: &str) -> Cell {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell == "." {
        return Cell::Missing;
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Value(v),
        Ok(_) => Cell::Missing,
        Err(_) => Cell::Invalid,
    }
}
