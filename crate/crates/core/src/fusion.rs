//! SFIM hypersharpening: inject high-resolution spatial detail from a
//! panchromatic image into each upsampled spectral band.
//!
//! Smoothing-filter-based intensity modulation multiplies the bilinearly
//! upsampled band by the per-pixel ratio `pan / smooth(pan)`. Where the pan
//! carries no detail finer than the smoothing scale the ratio is 1 and the
//! band passes through unchanged; where it does, the band is modulated by
//! the same relative detail. Because every band is multiplied by the same
//! ratio field, per-pixel band ratios are preserved: fusion sharpens the
//! cube without touching its spectral shape.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{compose_psfs, convolve, decimate, make_rect_psf, upsample_bilinear, Psf};
use crate::raster::{HyperCube, ImageGrid};

/// Smallest value the modulation denominator (and, in lenient mode, the pan
/// itself) is allowed to take. Radiance is non-negative, so the floor only
/// guards numerical zeros.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

/// How to treat non-positive pan pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Error out when the pan contains a value at or below zero.
    Strict,
    /// Raise offending pixels to [`DENOMINATOR_FLOOR`] and continue.
    Lenient,
}

// ---------------------------------------------------------------------------
// Smoothing kernel
// ---------------------------------------------------------------------------

/// The degradation-matched smoothing kernel: a uniform `scale`×`scale` mean
/// filter composed with the detector blur. This is the kernel that maps the
/// pan down to the resolution of the original bands, so the SFIM ratio
/// cancels exactly when the pan carries no sub-band-scale detail.
pub fn smoothing_psf(scale: usize, detector: &Psf) -> Result<Psf> {
    compose_psfs(&[make_rect_psf(scale)?, detector.clone()])
}

// ---------------------------------------------------------------------------
// Single-band fusion
// ---------------------------------------------------------------------------

/// Fuse one low-resolution band with the high-resolution pan. Strict mode;
/// see [`sfim_fuse_with_mode`].
pub fn sfim_fuse(lr_band: &ImageGrid, pan: &ImageGrid, scale: usize, smooth: &Psf) -> Result<ImageGrid> {
    sfim_fuse_with_mode(lr_band, pan, scale, smooth, FusionMode::Strict)
}

/// Fuse one band: `upsample(lr_band) ⊙ pan ⊘ max(convolve(pan, smooth), floor)`.
///
/// The pan must measure `scale ×` the band in both axes.
pub fn sfim_fuse_with_mode(
    lr_band: &ImageGrid,
    pan: &ImageGrid,
    scale: usize,
    smooth: &Psf,
    mode: FusionMode,
) -> Result<ImageGrid> {
    if scale == 0 {
        return Err(Error::invalid("scale", "must be at least 1"));
    }
    let want = (lr_band.rows() * scale, lr_band.cols() * scale);
    if pan.shape() != want {
        return Err(Error::dims("pan", want, pan.shape()));
    }
    let pan = floored_pan(pan, mode)?;
    let upsampled = upsample_bilinear(lr_band, scale)?;
    let smoothed = convolve(&pan, smooth)?;
    Ok(sfim_core(&upsampled, &pan, &smoothed))
}

fn floored_pan(pan: &ImageGrid, mode: FusionMode) -> Result<ImageGrid> {
    match mode {
        FusionMode::Strict => {
            for r in 0..pan.rows() {
                for c in 0..pan.cols() {
                    let v = pan.get(r, c);
                    if v <= 0.0 {
                        return Err(Error::invalid(
                            "pan",
                            format!("non-positive value {v} at ({r}, {c}); floor the radiance or use lenient mode"),
                        ));
                    }
                }
            }
            Ok(pan.clone())
        }
        FusionMode::Lenient => Ok(pan.map(|v| v.max(DENOMINATOR_FLOOR))),
    }
}

/// The modulation itself, once the smoothed pan is in hand:
/// `out = upsampled ⊙ pan ⊘ max(smoothed, floor)`.
fn sfim_core(upsampled: &ImageGrid, pan: &ImageGrid, smoothed: &ImageGrid) -> ImageGrid {
    ImageGrid::from_fn(upsampled.rows(), upsampled.cols(), |r, c| {
        let denominator = smoothed.get(r, c).max(DENOMINATOR_FLOOR);
        upsampled.get(r, c) * pan.get(r, c) / denominator
    })
}

// ---------------------------------------------------------------------------
// Cube fusion
// ---------------------------------------------------------------------------

/// Fuse every band of `cube` against the same pan. Strict mode.
pub fn fuse_cube(cube: &HyperCube, pan: &ImageGrid, scale: usize, smooth: &Psf) -> Result<HyperCube> {
    fuse_cube_with_mode(cube, pan, scale, smooth, FusionMode::Strict)
}

/// Fuse every band in parallel, preserving band metadata. The pan is
/// validated and smoothed once, not per band.
pub fn fuse_cube_with_mode(
    cube: &HyperCube,
    pan: &ImageGrid,
    scale: usize,
    smooth: &Psf,
    mode: FusionMode,
) -> Result<HyperCube> {
    if scale == 0 {
        return Err(Error::invalid("scale", "must be at least 1"));
    }
    let want = (cube.rows() * scale, cube.cols() * scale);
    if pan.shape() != want {
        return Err(Error::dims("pan", want, pan.shape()));
    }
    let pan = floored_pan(pan, mode)?;
    let smoothed = convolve(&pan, smooth)?;
    let fused = cube
        .bands()
        .par_iter()
        .map(|band| upsample_bilinear(band, scale).map(|up| sfim_core(&up, &pan, &smoothed)))
        .collect::<Result<Vec<_>>>()?;
    HyperCube::with_meta(fused, cube.meta().to_vec())
}

// ---------------------------------------------------------------------------
// Degradation (for consistency checks)
// ---------------------------------------------------------------------------

/// Map a high-resolution band back to low resolution: blur with the detector
/// kernel, then block-average decimate. The counterpart of fusion in
/// round-trip consistency checks.
pub fn degrade_band(hr: &ImageGrid, blur: &Psf, scale: usize) -> Result<ImageGrid> {
    decimate(&convolve(hr, blur)?, scale)
}
