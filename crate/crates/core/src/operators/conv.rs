//! Convolution with edge replication and its exact adjoint.

use crate::error::{Error, Result};
use crate::operators::Psf;
use crate::raster::ImageGrid;

fn check_fit(img: &ImageGrid, psf: &Psf) -> Result<()> {
    if psf.rows() > img.rows() || psf.cols() > img.cols() {
        return Err(Error::invalid(
            "psf",
            format!(
                "kernel {}x{} larger than image {}x{}",
                psf.rows(),
                psf.cols(),
                img.rows(),
                img.cols()
            ),
        ));
    }
    Ok(())
}

/// Convolve with edge replication:
/// `out(r, c) = sum K[i, j] * img(r + ar - i, c + ac - j)` with clamped reads.
pub fn convolve(img: &ImageGrid, psf: &Psf) -> Result<ImageGrid> {
    check_fit(img, psf)?;
    let (rows, cols) = img.shape();
    let (ar, ac) = psf.anchor();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for i in 0..psf.rows() {
                for j in 0..psf.cols() {
                    let sr = r as i64 + ar as i64 - i as i64;
                    let sc = c as i64 + ac as i64 - j as i64;
                    acc += psf.weight(i, j) * img.at_clamped(sr, sc);
                }
            }
            out.push(acc);
        }
    }
    Ok(ImageGrid::from_raw(rows, cols, out))
}

/// Exact transpose of [`convolve`]: every forward tap is replayed as a
/// scatter, so edge replication is accounted for and the dot-product identity
/// `<convolve(x), y> = <x, convolve_adjoint(y)>` holds to rounding error.
/// In the interior this is plain correlation with the same kernel.
pub fn convolve_adjoint(img: &ImageGrid, psf: &Psf) -> Result<ImageGrid> {
    check_fit(img, psf)?;
    let (rows, cols) = img.shape();
    let (ar, ac) = psf.anchor();
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let y = img.get(r, c);
            for i in 0..psf.rows() {
                for j in 0..psf.cols() {
                    let sr = (r as i64 + ar as i64 - i as i64).clamp(0, rows as i64 - 1) as usize;
                    let sc = (c as i64 + ac as i64 - j as i64).clamp(0, cols as i64 - 1) as usize;
                    out[sr * cols + sc] += psf.weight(i, j) * y;
                }
            }
        }
    }
    Ok(ImageGrid::from_raw(rows, cols, out))
}
