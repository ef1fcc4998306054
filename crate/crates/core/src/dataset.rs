//! Observation matrices and their CSV representation.
//!
//! Internally a dataset is stored as a p×n matrix (dimensions × observations).
//! On disk it is one observation per row, one dimension per column, so the
//! loader transposes.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{MtsError, Result};

/// A p×n observation matrix with an optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    data: DMatrix<f64>,
    label: Option<String>,
}

impl Dataset {
    /// Wraps a p×n matrix. Requires p ≥ 1, n ≥ 2 and finite entries.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(MtsError::EmptyDimensions);
        }
        if data.ncols() < 2 {
            return Err(MtsError::InsufficientObservations {
                required: 2,
                actual: data.ncols(),
            });
        }
        for col in 0..data.ncols() {
            for row in 0..data.nrows() {
                if !data[(row, col)].is_finite() {
                    return Err(MtsError::NonFinite { row, col });
                }
            }
        }
        Ok(Self { data, label: None })
    }

    /// Builds a dataset from observation rows (each inner vector is one observation).
    pub fn from_observations(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(MtsError::DimensionMismatch {
                    context: format!("observation {i}"),
                    expected: p,
                    actual: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(p, n, |i, j| rows[j][i]))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Number of dimensions.
    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Applies a linear map to every observation, returning `M·X`.
    pub fn transform(&self, m: &DMatrix<f64>) -> Result<Dataset> {
        if m.ncols() != self.p() {
            return Err(MtsError::DimensionMismatch {
                context: "linear transform".into(),
                expected: self.p(),
                actual: m.ncols(),
            });
        }
        let mut out = Dataset::new(m * &self.data)?;
        out.label = self.label.clone();
        Ok(out)
    }

    /// Reads a CSV file: one observation per row, optional header row.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let read_err = |message: String| MtsError::Read {
            path: path.to_path_buf(),
            message,
        };
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| read_err(e.to_string()))?;
        let ds = Self::from_csv_str(&text).map_err(|e| match e {
            MtsError::Read { message, .. } => read_err(message),
            other => read_err(other.to_string()),
        })?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(ds.with_label(label))
    }

    /// Parses CSV text. A first row that does not parse as numbers is
    /// treated as a header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| MtsError::Read {
                path: Default::default(),
                message: e.to_string(),
            })?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(values) => rows.push(values),
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(MtsError::Read {
                        path: Default::default(),
                        message: format!("line {}: {e}", line + 1),
                    })
                }
            }
        }
        Self::from_observations(&rows)
    }

    /// Serializes as CSV with one observation per row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for j in 0..self.n() {
            let row: Vec<String> = (0..self.p())
                .map(|i| format!("{}", self.data[(i, j)]))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Arithmetic mean of each dimension (row) of `x`.
pub fn sample_mean(x: &Dataset) -> DVector<f64> {
    let n = x.n() as f64;
    DVector::from_iterator(x.p(), x.matrix().row_iter().map(|r| r.sum() / n))
}
