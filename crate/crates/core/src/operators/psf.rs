//! Discrete point-spread functions.
//!
//! A [`Psf`] is a small weight grid plus an integer anchor that states which
//! cell sits on the output pixel. Convolution with kernel `K` and anchor
//! `(ar, ac)` reads
//!
//! ```text
//! out(r, c) = sum over (i, j) of K[i, j] * img(r + ar - i, c + ac - j)
//! ```
//!
//! with edge replication outside the image. Constructors place the anchor at
//! `(rows / 2, cols / 2)`, which centres odd kernels and puts an even kernel's
//! footprint at `{0, ..., size-1}` relative to the output pixel; composition
//! adds anchors so chained blurs keep their combined alignment.

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    rows: usize,
    cols: usize,
    anchor_row: usize,
    anchor_col: usize,
    weights: Vec<f64>,
}

impl Psf {
    /// Build from raw weights. The sum must be 1 within 1e-9; individual
    /// weights may be negative (blind estimates occasionally dip below zero
    /// before projection), which [`Psf::is_nonnegative`] reports.
    pub fn new(
        rows: usize,
        cols: usize,
        anchor_row: usize,
        anchor_col: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("psf", "kernel must be non-empty"));
        }
        if weights.len() != rows * cols {
            return Err(Error::invalid(
                "psf",
                format!("expected {} weights for {rows}x{cols}, got {}", rows * cols, weights.len()),
            ));
        }
        if anchor_row >= rows || anchor_col >= cols {
            return Err(Error::invalid(
                "psf",
                format!("anchor ({anchor_row}, {anchor_col}) outside {rows}x{cols} kernel"),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { context: "psf weights".to_string() });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid("psf", format!("weights sum to {sum}, expected 1")));
        }
        Ok(Psf { rows, cols, anchor_row, anchor_col, weights })
    }

    /// 1x1 kernel that leaves images unchanged.
    pub fn identity() -> Self {
        Psf { rows: 1, cols: 1, anchor_row: 0, anchor_col: 0, weights: vec![1.0] }
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
    pub fn anchor(&self) -> (usize, usize) {
        (self.anchor_row, self.anchor_col)
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.weights[i * self.cols + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    /// Centroid of the weights relative to the anchor, in pixels.
    pub fn centroid(&self) -> (f64, f64) {
        let mut cr = 0.0;
        let mut cc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let w = self.weight(i, j);
                cr += w * (i as f64 - self.anchor_row as f64);
                cc += w * (j as f64 - self.anchor_col as f64);
            }
        }
        (cr, cc)
    }
}

/// Uniform square mean filter of the given support. `support = 2` models a
/// detector that integrates over the area later collapsed by 2x decimation;
/// `support = 1` is the identity.
pub fn make_rect_psf(support: usize) -> Result<Psf> {
    if support == 0 {
        return Err(Error::invalid("support", "rect kernel support must be >= 1"));
    }
    let n = support * support;
    Psf::new(support, support, support / 2, support / 2, vec![1.0 / n as f64; n])
}

/// Sampled, normalized isotropic Gaussian on a `(2*radius+1)^2` grid.
pub fn make_gaussian_psf(sigma: f64, radius: usize) -> Result<Psf> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
    }
    let size = 2 * radius + 1;
    let mut weights = Vec::with_capacity(size * size);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for i in 0..size {
        for j in 0..size {
            let di = i as f64 - radius as f64;
            let dj = j as f64 - radius as f64;
            weights.push((-(di * di + dj * dj) * inv).exp());
        }
    }
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Psf::new(size, size, radius, radius, weights)
}

/// Full discrete convolution of a kernel chain into one equivalent kernel.
/// Anchors add, so applying the composite matches applying the chain in
/// sequence (away from image borders, where replication differs). The result
/// is renormalized to absorb rounding drift.
pub fn compose_psfs(kernels: &[Psf]) -> Result<Psf> {
    if kernels.is_empty() {
        return Err(Error::invalid("kernels", "cannot compose an empty kernel list"));
    }
    let mut acc = kernels[0].clone();
    for k in &kernels[1..] {
        let rows = acc.rows + k.rows - 1;
        let cols = acc.cols + k.cols - 1;
        let mut weights = vec![0.0; rows * cols];
        for (ia, wa) in acc.weights.iter().enumerate() {
            let (ra, ca) = (ia / acc.cols, ia % acc.cols);
            for (ib, wb) in k.weights.iter().enumerate() {
                let (rb, cb) = (ib / k.cols, ib % k.cols);
                weights[(ra + rb) * cols + (ca + cb)] += wa * wb;
            }
        }
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        acc = Psf::new(rows, cols, acc.anchor_row + k.anchor_row, acc.anchor_col + k.anchor_col, weights)?;
    }
    Ok(acc)
}
