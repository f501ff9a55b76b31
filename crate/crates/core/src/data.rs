//! Design matrices, responses and the centering/scaling transform.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FridgeError, Result};

/// A regression problem, optionally carrying the transform back to raw scale.
///
/// Raw values relate to stored ones by `raw = center + scale * stored`, per
/// column for `x` and with unit scale for `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub column_names: Vec<String>,
    pub center_x: Vec<f64>,
    pub scale_x: Vec<f64>,
    pub center_y: f64,
    pub standardized: bool,
}

/// Coefficients and intercept of a linear predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        x * beta + DVector::from_element(x.nrows(), self.intercept)
    }

    pub fn support(&self) -> Vec<usize> {
        support_of(&self.coefficients)
    }
}

pub fn support_of(coefficients: &[f64]) -> Vec<usize> {
    coefficients
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, column_names: Option<Vec<String>>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(FridgeError::InvalidInput(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(FridgeError::InvalidInput("empty design matrix".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(FridgeError::InvalidInput("non-finite value in data".into()));
        }
        let p = x.ncols();
        let column_names = match column_names {
            Some(names) if names.len() == p => names,
            Some(names) => {
                return Err(FridgeError::InvalidInput(format!(
                    "{} column names for {p} columns",
                    names.len()
                )))
            }
            None => (1..=p).map(|j| format!("x{j}")).collect(),
        };
        Ok(Dataset {
            x,
            y,
            column_names,
            center_x: vec![0.0; p],
            scale_x: vec![1.0; p],
            center_y: 0.0,
            standardized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Centers every column and the response, scales columns to unit
    /// `(1/n) sum x^2`. Transforms compose with any already stored.
    pub fn standardize(&self) -> Result<Dataset> {
        let n = self.n() as f64;
        let mut x = self.x.clone();
        let mut center_x = self.center_x.clone();
        let mut scale_x = self.scale_x.clone();
        for j in 0..self.p() {
            let mut col = x.column_mut(j);
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
            let second = col.norm_squared() / n;
            let scale = second.sqrt();
            let spread = col.amax();
            // Relative test so columns of tiny but genuine spread survive.
            if !(scale > 0.0) || spread <= 1e-12 * (mean.abs() + spread) {
                return Err(FridgeError::DegenerateColumn(self.column_names[j].clone()));
            }
            col /= scale;
            center_x[j] += scale_x[j] * mean;
            scale_x[j] *= scale;
        }
        let y_mean = self.y.sum() / n;
        let y = self.y.add_scalar(-y_mean);
        Ok(Dataset {
            x,
            y,
            column_names: self.column_names.clone(),
            center_x,
            scale_x,
            center_y: self.center_y + y_mean,
            standardized: true,
        })
    }

    /// Maps coefficients on the stored scale to raw-scale coefficients and
    /// intercept. `intercept` is the stored-scale intercept (0 for centered data).
    pub fn to_raw(&self, coefficients: &[f64], intercept: f64) -> LinearModel {
        let raw: Vec<f64> = coefficients
            .iter()
            .zip(&self.scale_x)
            .map(|(b, s)| b / s)
            .collect();
        let shift: f64 = raw.iter().zip(&self.center_x).map(|(b, c)| b * c).sum();
        LinearModel {
            coefficients: raw,
            intercept: self.center_y + intercept - shift,
        }
    }

    /// Raw-scale design matrix reconstructed from the stored transform.
    pub fn raw_x(&self) -> DMatrix<f64> {
        let mut x = self.x.clone();
        for j in 0..self.p() {
            let mut col = x.column_mut(j);
            col *= self.scale_x[j];
            col.add_scalar_mut(self.center_x[j]);
        }
        x
    }

    pub fn raw_y(&self) -> DVector<f64> {
        self.y.add_scalar(self.center_y)
    }

    /// New dataset made of the given rows, on the raw scale.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = self.raw_x().select_rows(rows);
        let y = self.raw_y().select_rows(rows);
        let p = self.p();
        Dataset {
            x,
            y,
            column_names: self.column_names.clone(),
            center_x: vec![0.0; p],
            scale_x: vec![1.0; p],
            center_y: 0.0,
            standardized: false,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Which CSV column holds the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    Index(usize),
}

impl From<&str> for ResponseColumn {
    fn from(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(s.to_string()),
        }
    }
}

/// Reads a headed, all-numeric CSV. Every non-response column is a predictor,
/// in file order.
pub fn load_csv(path: impl AsRef<Path>, response: &ResponseColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let response_idx = match response {
        ResponseColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FridgeError::Schema(format!("response column `{name}` not found")))?,
        ResponseColumn::Index(i) if *i < headers.len() => *i,
        ResponseColumn::Index(i) => {
            return Err(FridgeError::Schema(format!(
                "response column index {i} out of range ({} columns)",
                headers.len()
            )))
        }
    };
    if headers.len() < 2 {
        return Err(FridgeError::Schema("need at least one predictor column".into()));
    }

    let mut xs: Vec<f64> = Vec::new();
    let mut ys = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(FridgeError::Parse {
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let parsed: f64 = if cell.is_empty() {
                return Err(FridgeError::Parse {
                    row,
                    column: headers[c].clone(),
                    message: "missing value".into(),
                });
            } else {
                cell.parse().map_err(|_| FridgeError::Parse {
                    row,
                    column: headers[c].clone(),
                    message: format!("`{cell}` is not a number"),
                })?
            };
            if c == response_idx {
                ys.push(parsed);
            } else {
                xs.push(parsed);
            }
        }
    }
    let n = ys.len();
    let p = headers.len() - 1;
    let names: Vec<String> = headers
        .into_iter()
        .enumerate()
        .filter(|(c, _)| *c != response_idx)
        .map(|(_, h)| h)
        .collect();
    if n == 0 {
        return Err(FridgeError::Schema("no data rows".into()));
    }
    let x = DMatrix::from_row_slice(n, p, &xs);
    Dataset::new(x, DVector::from_vec(ys), Some(names))
}

/// Writes raw-scale `x` columns followed by a `y` column.
pub fn write_csv(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = dataset.column_names.clone();
    header.push("y".into());
    writer.write_record(&header)?;
    let x = dataset.raw_x();
    let y = dataset.raw_y();
    for i in 0..dataset.n() {
        let mut row: Vec<String> = (0..dataset.p()).map(|j| format_float(x[(i, j)])).collect();
        row.push(format_float(y[i]));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}
