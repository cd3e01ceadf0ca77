//! Per-column sub-pixel warp (keystone registration operator).
//!
//! Keystone shifts every column of a band by its own `(dx, dy)`. The forward
//! warp samples the source image at `(row + dy(col), col + dx(col))` with
//! bilinear interpolation and edge replication; the adjoint replays each
//! bilinear tap as a scatter, which makes it the exact matrix transpose.

use crate::error::{Error, Result};
use crate::raster::ImageGrid;

fn check_shifts(img: &ImageGrid, shifts: &[(f64, f64)]) -> Result<()> {
    if shifts.len() != img.cols() {
        return Err(Error::invalid(
            "shifts",
            format!("{} column shifts for an image with {} columns", shifts.len(), img.cols()),
        ));
    }
    if shifts.iter().any(|(dx, dy)| !dx.is_finite() || !dy.is_finite()) {
        return Err(Error::NonFinite { context: "warp shifts".to_string() });
    }
    Ok(())
}

/// The four bilinear taps for an output pixel, as `(row, col, weight)`.
#[inline]
fn taps(
    rows: usize,
    cols: usize,
    r: usize,
    c: usize,
    dx: f64,
    dy: f64,
) -> [(usize, usize, f64); 4] {
    let sr = r as f64 + dy;
    let sc = c as f64 + dx;
    let r0 = sr.floor();
    let c0 = sc.floor();
    let fr = sr - r0;
    let fc = sc - c0;
    let clamp_r = |v: f64| (v.max(0.0) as usize).min(rows - 1);
    let clamp_c = |v: f64| (v.max(0.0) as usize).min(cols - 1);
    [
        (clamp_r(r0), clamp_c(c0), (1.0 - fr) * (1.0 - fc)),
        (clamp_r(r0), clamp_c(c0 + 1.0), (1.0 - fr) * fc),
        (clamp_r(r0 + 1.0), clamp_c(c0), fr * (1.0 - fc)),
        (clamp_r(r0 + 1.0), clamp_c(c0 + 1.0), fr * fc),
    ]
}

/// Bilinear warp: `out(r, c) = img(r + dy(c), c + dx(c))`, edge replicated.
pub fn warp_shift(img: &ImageGrid, shifts: &[(f64, f64)]) -> Result<ImageGrid> {
    check_shifts(img, shifts)?;
    let (rows, cols) = img.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (dx, dy) = shifts[c];
            let mut acc = 0.0;
            for (tr, tc, w) in taps(rows, cols, r, c, dx, dy) {
                acc += w * img.get(tr, tc);
            }
            out.push(acc);
        }
    }
    Ok(ImageGrid::from_raw(rows, cols, out))
}

/// Exact transpose of [`warp_shift`] with the same shift table.
pub fn warp_shift_adjoint(img: &ImageGrid, shifts: &[(f64, f64)]) -> Result<ImageGrid> {
    check_shifts(img, shifts)?;
    let (rows, cols) = img.shape();
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let (dx, dy) = shifts[c];
            let y = img.get(r, c);
            for (tr, tc, w) in taps(rows, cols, r, c, dx, dy) {
                out[tr * cols + tc] += w * y;
            }
        }
    }
    Ok(ImageGrid::from_raw(rows, cols, out))
}
