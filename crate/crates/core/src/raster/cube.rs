//! Stack of co-registered spectral bands.

use crate::error::{Error, Result};
use crate::raster::ImageGrid;

/// Per-band metadata. `index` is the position in the cube; wavelengths are
/// optional because synthetic cubes have none.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMeta {
    pub index: usize,
    pub wavelength_nm: Option<f64>,
}

/// A hyperspectral cube: one [`ImageGrid`] per band, all the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    bands: Vec<ImageGrid>,
    meta: Vec<BandMeta>,
}

impl HyperCube {
    /// Build a cube with default metadata (indices only).
    pub fn new(bands: Vec<ImageGrid>) -> Result<Self> {
        let meta = (0..bands.len()).map(|index| BandMeta { index, wavelength_nm: None }).collect();
        HyperCube::with_meta(bands, meta)
    }

    pub fn with_meta(bands: Vec<ImageGrid>, meta: Vec<BandMeta>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::invalid("bands", "cube must contain at least one band"));
        }
        if meta.len() != bands.len() {
            return Err(Error::invalid(
                "meta",
                format!("{} metadata entries for {} bands", meta.len(), bands.len()),
            ));
        }
        let shape = bands[0].shape();
        for (k, band) in bands.iter().enumerate() {
            if band.shape() != shape {
                return Err(Error::dims(format!("band {k}"), shape, band.shape()));
            }
        }
        for (k, m) in meta.iter().enumerate() {
            if m.index != k {
                return Err(Error::invalid(
                    "meta",
                    format!("band indices must be contiguous from 0; entry {k} has index {}", m.index),
                ));
            }
        }
        Ok(HyperCube { bands, meta })
    }

    #[inline]
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.bands[0].rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.bands[0].cols()
    }

    #[inline]
    pub fn band(&self, k: usize) -> &ImageGrid {
        &self.bands[k]
    }

    pub fn bands(&self) -> &[ImageGrid] {
        &self.bands
    }

    pub fn meta(&self) -> &[BandMeta] {
        &self.meta
    }

    pub fn into_bands(self) -> Vec<ImageGrid> {
        self.bands
    }

    /// Spectrum at one pixel, band-major.
    pub fn spectrum_at(&self, r: usize, c: usize) -> Vec<f64> {
        self.bands.iter().map(|b| b.get(r, c)).collect()
    }
}
