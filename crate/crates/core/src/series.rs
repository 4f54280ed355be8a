//! The multivariate series container and elementwise preprocessing.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// A `T x K` real-valued series. Row `t` is the observation at time `t`;
/// the row order is the candidate temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: DMatrix<f64>,
}

impl TimeSeries {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(invalid("time series needs at least one row and one column"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % data.nrows(), pos / data.nrows());
            return Err(invalid(format!("non-finite value at row {row}, column {col}")));
        }
        Ok(Self { data })
    }

    /// Builds a series from row-major values.
    pub fn from_rows(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(invalid(format!(
                "expected {} values for a {rows}x{cols} series, got {}",
                rows * cols,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(invalid("columns have different lengths"));
        }
        Self::new(DMatrix::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.data.row(t).iter().copied().collect()
    }

    pub fn column(&self, j: usize) -> Result<TimeSeries> {
        if j >= self.dim() {
            return Err(invalid(format!("column {j} out of range for K={}", self.dim())));
        }
        Self::new(self.data.columns(j, 1).into_owned())
    }

    /// The same observations read in the opposite temporal order.
    pub fn reversed(&self) -> TimeSeries {
        let t = self.len();
        TimeSeries {
            data: DMatrix::from_fn(t, self.dim(), |i, j| self.data[(t - 1 - i, j)]),
        }
    }

    pub fn column_means(&self) -> DVector<f64> {
        let t = self.len() as f64;
        DVector::from_iterator(self.dim(), self.data.column_iter().map(|c| c.sum() / t))
    }

    /// Sample covariance `(1/T) sum (x_t - m)(x_t - m)^T`.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let (centered, _) = demean(self);
        let x = centered.data;
        (x.transpose() * &x) / self.len() as f64
    }
}

/// Subtracts the column means. Returns the centered series and the means.
pub fn demean(ts: &TimeSeries) -> (TimeSeries, DVector<f64>) {
    let mean = ts.column_means();
    let mut data = ts.data.clone();
    for (j, mut col) in data.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    (TimeSeries { data }, mean)
}

/// Applies the `d`-th order difference along time; the result has `T - d` rows.
pub fn difference(ts: &TimeSeries, d: usize) -> Result<TimeSeries> {
    if d == 0 {
        return Err(invalid("difference order must be at least 1"));
    }
    if ts.len() <= d {
        return Err(Error::InsufficientLength {
            needed: d + 1,
            got: ts.len(),
        });
    }
    let mut data = ts.data.clone();
    for _ in 0..d {
        let rows = data.nrows();
        data = DMatrix::from_fn(rows - 1, data.ncols(), |i, j| data[(i + 1, j)] - data[(i, j)]);
    }
    TimeSeries::new(data)
}
