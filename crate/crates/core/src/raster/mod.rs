//! Core raster containers and on-disk formats.
//!
//! [`ImageGrid`] is a dense row-major `f64` plane, [`HyperCube`] a stack of
//! equally sized planes with per-band metadata, and [`KeystoneModel`] the
//! per-band, per-column sub-pixel shift table measured during instrument
//! calibration. Cubes round-trip through a band-sequential float32 file with a
//! small text header ([`envi`]); shift tables round-trip through CSV
//! ([`keystone`]).

mod cube;
pub mod envi;
mod grid;
pub mod keystone;

pub use cube::{BandMeta, HyperCube};
pub use envi::{load_cube, save_cube};
pub use grid::ImageGrid;
pub use keystone::{load_keystone_table, save_keystone_table, KeystoneModel, MAX_SHIFT};
