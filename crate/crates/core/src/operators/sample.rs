//! Grid resampling: decimation, zero insertion, and interpolating upsamplers.
//!
//! Decimation keeps the sample at phase `(0, 0)` of every `s x s` block, so
//! `decimate(decimate_adjoint(y)) == y` exactly. The upsamplers use the
//! pixel-centre alignment convention: high-resolution pixel `R` maps to
//! low-resolution coordinate `(R + 0.5) / s - 0.5`, which keeps content
//! stationary under upsample-then-degrade round trips.

use crate::error::{Error, Result};
use crate::raster::ImageGrid;

fn check_scale(scale: usize) -> Result<()> {
    if scale == 0 {
        return Err(Error::invalid("scale", "must be >= 1"));
    }
    Ok(())
}

/// Keep every `scale`-th sample starting at `(0, 0)`. Dimensions must divide.
pub fn decimate(img: &ImageGrid, scale: usize) -> Result<ImageGrid> {
    check_scale(scale)?;
    let (rows, cols) = img.shape();
    if rows % scale != 0 || cols % scale != 0 {
        return Err(Error::invalid(
            "scale",
            format!("image {rows}x{cols} not divisible by scale {scale}"),
        ));
    }
    let (or, oc) = (rows / scale, cols / scale);
    let mut out = Vec::with_capacity(or * oc);
    for r in 0..or {
        for c in 0..oc {
            out.push(img.get(r * scale, c * scale));
        }
    }
    Ok(ImageGrid::from_raw(or, oc, out))
}

/// Transpose of [`decimate`]: zero insertion onto the fine grid.
pub fn decimate_adjoint(img: &ImageGrid, scale: usize) -> Result<ImageGrid> {
    check_scale(scale)?;
    let (rows, cols) = img.shape();
    let (or, oc) = (rows * scale, cols * scale);
    let mut out = vec![0.0; or * oc];
    for r in 0..rows {
        for c in 0..cols {
            out[(r * scale) * oc + c * scale] = img.get(r, c);
        }
    }
    Ok(ImageGrid::from_raw(or, oc, out))
}

/// Source coordinate for output index `dst` under pixel-centre alignment.
#[inline]
fn src_coord(dst: usize, scale: usize) -> f64 {
    (dst as f64 + 0.5) / scale as f64 - 0.5
}

/// Bilinear upsampling by an integer factor.
pub fn upsample_bilinear(img: &ImageGrid, scale: usize) -> Result<ImageGrid> {
    check_scale(scale)?;
    let (rows, cols) = img.shape();
    let (or, oc) = (rows * scale, cols * scale);
    let mut out = Vec::with_capacity(or * oc);
    for r in 0..or {
        let sr = src_coord(r, scale);
        let r0 = sr.floor();
        let fr = sr - r0;
        for c in 0..oc {
            let sc = src_coord(c, scale);
            let c0 = sc.floor();
            let fc = sc - c0;
            let v = (1.0 - fr) * (1.0 - fc) * img.at_clamped(r0 as i64, c0 as i64)
                + (1.0 - fr) * fc * img.at_clamped(r0 as i64, c0 as i64 + 1)
                + fr * (1.0 - fc) * img.at_clamped(r0 as i64 + 1, c0 as i64)
                + fr * fc * img.at_clamped(r0 as i64 + 1, c0 as i64 + 1);
            out.push(v);
        }
    }
    Ok(ImageGrid::from_raw(or, oc, out))
}

/// Catmull-Rom cubic interpolation weight.
#[inline]
fn cubic_weight(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        1.5 * a * a * a - 2.5 * a * a + 1.0
    } else if a < 2.0 {
        -0.5 * a * a * a + 2.5 * a * a - 4.0 * a + 2.0
    } else {
        0.0
    }
}

/// Bicubic (Catmull-Rom) upsampling by an integer factor; the solver's
/// initialization and the interpolation baseline both use this.
pub fn upsample_bicubic(img: &ImageGrid, scale: usize) -> Result<ImageGrid> {
    check_scale(scale)?;
    let (rows, cols) = img.shape();
    let (or, oc) = (rows * scale, cols * scale);
    let mut out = Vec::with_capacity(or * oc);
    for r in 0..or {
        let sr = src_coord(r, scale);
        let r0 = sr.floor() as i64;
        let fr = sr - r0 as f64;
        let wr: [f64; 4] = [
            cubic_weight(fr + 1.0),
            cubic_weight(fr),
            cubic_weight(fr - 1.0),
            cubic_weight(fr - 2.0),
        ];
        for c in 0..oc {
            let sc = src_coord(c, scale);
            let c0 = sc.floor() as i64;
            let fc = sc - c0 as f64;
            let wc: [f64; 4] = [
                cubic_weight(fc + 1.0),
                cubic_weight(fc),
                cubic_weight(fc - 1.0),
                cubic_weight(fc - 2.0),
            ];
            let mut acc = 0.0;
            for (ir, wrow) in wr.iter().enumerate() {
                for (ic, wcol) in wc.iter().enumerate() {
                    acc += wrow
                        * wcol
                        * img.at_clamped(r0 + ir as i64 - 1, c0 + ic as i64 - 1);
                }
            }
            out.push(acc);
        }
    }
    Ok(ImageGrid::from_raw(or, oc, out))
}
