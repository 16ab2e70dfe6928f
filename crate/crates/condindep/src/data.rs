//! Observation data model, validation, and CSV ingestion.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance for the unit-norm check on [`Direction`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// An immutable sample of n observations (X in R^d, Y in {0,1}, Z in R).
///
/// All entries are validated finite at construction, every label is 0 or 1,
/// and n >= 2. Row order is preserved for reproducible diagnostics but is
/// irrelevant to every downstream statistic.
#[derive(Clone, Debug)]
pub struct Dataset {
    xs: Vec<f64>, // row-major, n * d
    ys: Vec<u8>,
    zs: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    /// Build a dataset from covariate rows, labels, and z values.
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<u8>, zs: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() != zs.len() {
            return Err(Error::LengthMismatch(xs.len(), ys.len(), zs.len()));
        }
        let n = xs.len();
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        let d = xs[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for (i, row) in xs.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    found: row.len(),
                    expected: d,
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(flat, d, ys, zs)
    }

    /// Build a dataset from an already-flattened row-major covariate matrix.
    pub fn from_flat(xs: Vec<f64>, d: usize, ys: Vec<u8>, zs: Vec<f64>) -> Result<Self> {
        if d == 0 || !xs.len().is_multiple_of(d) {
            return Err(Error::RaggedRow {
                row: 0,
                found: xs.len(),
                expected: d.max(1),
            });
        }
        let n = xs.len() / d;
        if n != ys.len() || n != zs.len() {
            return Err(Error::LengthMismatch(n, ys.len(), zs.len()));
        }
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        for (i, &y) in ys.iter().enumerate() {
            if y > 1 {
                return Err(Error::NonBinaryLabel {
                    index: i + 1,
                    value: y as f64,
                });
            }
        }
        for (i, &x) in xs.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    what: "covariates",
                    index: i / d + 1,
                });
            }
        }
        for (i, &z) in zs.iter().enumerate() {
            if !z.is_finite() {
                return Err(Error::NonFinite {
                    what: "z",
                    index: i + 1,
                });
            }
        }
        Ok(Dataset { xs, ys, zs, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Covariate row i (0-based).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.xs[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self, i: usize) -> u8 {
        self.ys[i]
    }

    pub fn z(&self, i: usize) -> f64 {
        self.zs[i]
    }

    pub fn ys(&self) -> &[u8] {
        &self.ys
    }

    pub fn zs(&self) -> &[f64] {
        &self.zs
    }

    /// (n0, n1) with n_j = #{i : Y_i = j}; always sums to n.
    pub fn class_counts(&self) -> (usize, usize) {
        let n1 = self.ys.iter().filter(|&&y| y == 1).count();
        (self.n - n1, n1)
    }

    /// Read a dataset from CSV, reporting the first offending row/column on
    /// malformed input.
    pub fn from_csv_path(path: &Path, schema: &CsvSchema) -> Result<Self> {
        Self::from_csv_reader(File::open(path)?, schema)
    }

    pub fn from_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();

        let mut x_cols: Vec<(usize, usize)> = Vec::new(); // (covariate index, column position)
        let mut y_col = None;
        let mut z_col = None;
        for (pos, name) in headers.iter().enumerate() {
            if name == schema.y_column {
                y_col = Some(pos);
            } else if name == schema.z_column {
                z_col = Some(pos);
            } else if let Some(rest) = name.strip_prefix(&schema.x_prefix) {
                if let Ok(idx) = rest.parse::<usize>() {
                    if idx >= 1 {
                        x_cols.push((idx, pos));
                    }
                }
            }
        }
        let y_col = y_col.ok_or_else(|| Error::MissingColumn(schema.y_column.clone()))?;
        let z_col = z_col.ok_or_else(|| Error::MissingColumn(schema.z_column.clone()))?;
        x_cols.sort_unstable();
        if x_cols.is_empty() {
            return Err(Error::MissingColumn(format!("{}1", schema.x_prefix)));
        }
        // covariate columns must be x1..xd with no gaps
        for (want, &(got, _)) in (1..).zip(x_cols.iter()) {
            if got != want {
                return Err(Error::MissingColumn(format!("{}{}", schema.x_prefix, want)));
            }
        }
        let d = x_cols.len();

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut zs = Vec::new();
        for (row_idx, record) in rdr.records().enumerate() {
            let row = row_idx + 1; // 1-based data rows, header excluded
            let record = record?;
            let field = |pos: usize, col: &str| -> Result<f64> {
                let raw = record.get(pos).ok_or_else(|| Error::BadCell {
                    row,
                    column: col.to_string(),
                    message: "missing field".into(),
                })?;
                let v: f64 = raw.trim().parse().map_err(|_| Error::BadCell {
                    row,
                    column: col.to_string(),
                    message: format!("not a number: `{raw}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::BadCell {
                        row,
                        column: col.to_string(),
                        message: format!("non-finite value `{raw}`"),
                    });
                }
                Ok(v)
            };

            for &(idx, pos) in &x_cols {
                xs.push(field(pos, &format!("{}{}", schema.x_prefix, idx))?);
            }
            let yv = field(y_col, &schema.y_column)?;
            if yv != 0.0 && yv != 1.0 {
                return Err(Error::BadCell {
                    row,
                    column: schema.y_column.clone(),
                    message: format!("y must be 0 or 1, got {yv}"),
                });
            }
            ys.push(yv as u8);
            zs.push(field(z_col, &schema.z_column)?);
        }

        Self::from_flat(xs, d, ys, zs)
    }

    /// Write the dataset as CSV. Floats use the shortest decimal that
    /// round-trips, so `from_csv(write_csv(ds))` reproduces `ds` bit-exactly.
    pub fn write_csv<W: Write>(&self, mut w: W, schema: &CsvSchema) -> Result<()> {
        let mut header: Vec<String> = (1..=self.d)
            .map(|j| format!("{}{}", schema.x_prefix, j))
            .collect();
        header.push(schema.y_column.clone());
        header.push(schema.z_column.clone());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n {
            let mut fields: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            fields.push(format!("{}", self.ys[i]));
            fields.push(format!("{}", self.zs[i]));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path, schema: &CsvSchema) -> Result<()> {
        self.write_csv(File::create(path)?, schema)
    }
}

/// Column-name mapping for CSV ingestion: covariates `x1..xd` by prefix,
/// one label column, one z column.
#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub x_prefix: String,
    pub y_column: String,
    pub z_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            x_prefix: "x".into(),
            y_column: "y".into(),
            z_column: "z".into(),
        }
    }
}

/// A unit vector in R^d defining the single index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Accepts a vector whose Euclidean norm is 1 within [`UNIT_NORM_TOL`].
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&beta);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NotUnit(norm));
        }
        Ok(Direction(beta))
    }

    /// Normalizes an arbitrary nonzero vector to unit length.
    pub fn from_unnormalized(v: &[f64]) -> Result<Self> {
        let norm = l2_norm(v);
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Direction(v.iter().map(|x| x / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
