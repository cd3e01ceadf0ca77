//! Dense 2-D image plane.

use crate::error::{Error, Result};

/// Row-major grid of `f64` samples.
///
/// Values are guaranteed finite: the validating constructors reject NaN and
/// infinity, so downstream numerics never have to re-check. Rows index the
/// along-track (scan) direction, columns the across-track (detector pixel)
/// direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// Build from a row-major buffer, rejecting empty shapes, length
    /// mismatches, and non-finite samples.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("shape", format!("grid must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(
                "data",
                format!("expected {} samples for {rows}x{cols}, got {}", rows * cols, data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("image sample at ({}, {})", i / cols, i % cols),
            });
        }
        Ok(ImageGrid { rows, cols, data })
    }

    /// Internal constructor for buffers that are finite by construction.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        ImageGrid { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        ImageGrid { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        assert!(value.is_finite(), "constant fill must be finite");
        ImageGrid { rows, cols, data: vec![value; rows * cols] }
    }

    /// Fill from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c);
                assert!(v.is_finite(), "from_fn produced non-finite value at ({r}, {c})");
                data.push(v);
            }
        }
        ImageGrid { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    /// Sample with edge replication: out-of-range indices clamp to the border.
    #[inline]
    pub fn at_clamped(&self, r: i64, c: i64) -> f64 {
        let rr = r.clamp(0, self.rows as i64 - 1) as usize;
        let cc = c.clamp(0, self.cols as i64 - 1) as usize;
        self.data[rr * self.cols + cc]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    // ---- elementwise helpers -------------------------------------------

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        let data = self.data.iter().map(|&v| f(v)).collect();
        ImageGrid::from_raw(self.rows, self.cols, data)
    }

    /// Elementwise combination of two equally sized grids.
    pub fn zip_map(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> ImageGrid {
        assert!(self.same_shape(other), "zip_map: shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        ImageGrid::from_raw(self.rows, self.cols, data)
    }

    /// `self += factor * other`, used by the descent loop.
    pub fn add_scaled(&mut self, other: &ImageGrid, factor: f64) {
        assert!(self.same_shape(other), "add_scaled: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    // ---- reductions -----------------------------------------------------

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        assert!(self.same_shape(other), "dot: shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Sum of squared samples.
    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.len() as f64
    }
}
