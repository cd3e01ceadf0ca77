//! Keystone shift model and its CSV representation.
//!
//! Keystone is the residual spectral misregistration of a pushbroom
//! spectrometer: after registering every band to a chosen reference band,
//! band `k` still samples the scene `(dx, dy)` low-resolution pixels away
//! from where the reference band samples it, and the offset varies with the
//! detector column (it typically grows linearly across the field of view).
//!
//! The on-disk form is a CSV with header `band,column,dx,dy`, one row per
//! non-reference `(band, column)` pair. The reference band is the single band
//! with no rows (its shifts are zero by definition); writing omits it, and
//! loading infers it the same way. A table that lists rows for every band is
//! also accepted when exactly one band is all zeros - that band becomes the
//! reference.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Sanity bound on |dx| and |dy| in low-resolution pixels. Calibrated
/// keystone is well under a pixel; anything larger is a corrupt table.
pub const MAX_SHIFT: f64 = 2.0;

/// Per-band, per-column sub-pixel shifts relative to a reference band.
#[derive(Debug, Clone, PartialEq)]
pub struct KeystoneModel {
    n_bands: usize,
    n_cols: usize,
    reference_band: usize,
    /// Row-major `[band][column]`.
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl KeystoneModel {
    /// Identity registration: every shift zero.
    pub fn zero(n_bands: usize, n_cols: usize, reference_band: usize) -> Result<Self> {
        if n_bands == 0 || n_cols == 0 {
            return Err(Error::invalid("shape", "keystone model must be non-empty"));
        }
        if reference_band >= n_bands {
            return Err(Error::invalid(
                "reference_band",
                format!("{reference_band} out of range for {n_bands} bands"),
            ));
        }
        Ok(KeystoneModel {
            n_bands,
            n_cols,
            reference_band,
            dx: vec![0.0; n_bands * n_cols],
            dy: vec![0.0; n_bands * n_cols],
        })
    }

    /// Build from a closure over `(band, column)`. The closure must return
    /// `(0, 0)` for the reference band and stay within [`MAX_SHIFT`].
    pub fn from_fn(
        n_bands: usize,
        n_cols: usize,
        reference_band: usize,
        mut f: impl FnMut(usize, usize) -> (f64, f64),
    ) -> Result<Self> {
        let mut model = KeystoneModel::zero(n_bands, n_cols, reference_band)?;
        for band in 0..n_bands {
            for col in 0..n_cols {
                let (dx, dy) = f(band, col);
                if !dx.is_finite() || !dy.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("keystone shift for band {band}, column {col}"),
                    });
                }
                if dx.abs() > MAX_SHIFT || dy.abs() > MAX_SHIFT {
                    return Err(Error::ShiftTable {
                        message: format!(
                            "shift ({dx}, {dy}) at band {band}, column {col} exceeds the \
                             sanity bound of {MAX_SHIFT} pixels"
                        ),
                    });
                }
                if band == reference_band && (dx != 0.0 || dy != 0.0) {
                    return Err(Error::ShiftTable {
                        message: format!(
                            "reference band {band} must have zero shifts, got ({dx}, {dy}) \
                             at column {col}"
                        ),
                    });
                }
                let i = band * n_cols + col;
                model.dx[i] = dx;
                model.dy[i] = dy;
            }
        }
        Ok(model)
    }

    #[inline]
    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn reference_band(&self) -> usize {
        self.reference_band
    }

    /// Shift of `band` at `col`, in low-resolution pixels.
    #[inline]
    pub fn shift(&self, band: usize, col: usize) -> (f64, f64) {
        debug_assert!(band < self.n_bands && col < self.n_cols);
        let i = band * self.n_cols + col;
        (self.dx[i], self.dy[i])
    }

    /// All column shifts of one band as `(dx, dy)` pairs.
    pub fn column_shifts(&self, band: usize) -> Vec<(f64, f64)> {
        (0..self.n_cols).map(|c| self.shift(band, c)).collect()
    }

    /// Column shifts of one band, negated (used to register that band back
    /// onto the reference geometry).
    pub fn negated_column_shifts(&self, band: usize) -> Vec<(f64, f64)> {
        (0..self.n_cols).map(|c| {
            let (dx, dy) = self.shift(band, c);
            (-dx, -dy)
        }).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.dx.iter().chain(self.dy.iter()).all(|&v| v == 0.0)
    }
}

// ---------------------------------------------------------------------------
// CSV round trip
// ---------------------------------------------------------------------------

/// Load a `band,column,dx,dy` table.
///
/// Requirements checked here: the header line; integer band/column in range;
/// finite shifts within [`MAX_SHIFT`]; no duplicate pairs; full column
/// coverage for every listed band. The reference band is the one band without
/// rows, or, if all bands are listed, the lowest-indexed band whose shifts are
/// all zero.
pub fn load_keystone_table(path: &Path, n_bands: usize, n_cols: usize) -> Result<KeystoneModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty keystone table"))?;
    if header.trim() != "band,column,dx,dy" {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `band,column,dx,dy`, got `{}`", header.trim()),
        ));
    }
    if n_bands == 0 || n_cols == 0 {
        return Err(Error::invalid("shape", "keystone model must be non-empty"));
    }

    let mut dx = vec![0.0; n_bands * n_cols];
    let mut dy = vec![0.0; n_bands * n_cols];
    let mut seen = vec![false; n_bands * n_cols];

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(path, line_no, format!("expected 4 fields, got {}", fields.len())));
        }
        let band: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad band index `{}`", fields[0])))?;
        let col: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad column index `{}`", fields[1])))?;
        let sx: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad dx `{}`", fields[2])))?;
        let sy: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad dy `{}`", fields[3])))?;

        if band >= n_bands {
            return Err(Error::parse(path, line_no, format!("band {band} out of range (cube has {n_bands})")));
        }
        if col >= n_cols {
            return Err(Error::parse(path, line_no, format!("column {col} out of range (cube has {n_cols})")));
        }
        if !sx.is_finite() || !sy.is_finite() {
            return Err(Error::parse(path, line_no, "non-finite shift"));
        }
        if sx.abs() > MAX_SHIFT || sy.abs() > MAX_SHIFT {
            return Err(Error::parse(
                path,
                line_no,
                format!("shift ({sx}, {sy}) exceeds the sanity bound of {MAX_SHIFT} pixels"),
            ));
        }
        let i = band * n_cols + col;
        if seen[i] {
            return Err(Error::parse(path, line_no, format!("duplicate entry for band {band}, column {col}")));
        }
        seen[i] = true;
        dx[i] = sx;
        dy[i] = sy;
    }

    // Coverage per band: all columns, or none (reference candidate).
    let mut uncovered: Vec<usize> = Vec::new();
    for band in 0..n_bands {
        let covered = seen[band * n_cols..(band + 1) * n_cols].iter().filter(|&&s| s).count();
        if covered == 0 {
            uncovered.push(band);
        } else if covered != n_cols {
            return Err(Error::ShiftTable {
                message: format!("band {band} covers {covered} of {n_cols} columns"),
            });
        }
    }

    let reference_band = match uncovered.len() {
        1 => uncovered[0],
        0 => {
            // Fully listed table: the reference is the first all-zero band.
            (0..n_bands)
                .find(|&b| {
                    (0..n_cols).all(|c| {
                        let i = b * n_cols + c;
                        dx[i] == 0.0 && dy[i] == 0.0
                    })
                })
                .ok_or_else(|| Error::ShiftTable {
                    message: "table lists every band but none has all-zero shifts; \
                              cannot identify the reference band"
                        .to_string(),
                })?
        }
        _ => {
            return Err(Error::ShiftTable {
                message: format!("bands {uncovered:?} have no entries; exactly one (the reference) may be omitted"),
            })
        }
    };

    // Reference rows, when present, must be zero; when absent they already are.
    for c in 0..n_cols {
        let i = reference_band * n_cols + c;
        dx[i] = 0.0;
        dy[i] = 0.0;
    }

    Ok(KeystoneModel { n_bands, n_cols, reference_band, dx, dy })
}

/// Write the table, omitting the reference band (all zeros by definition).
/// Floats are serialized with shortest round-trip precision.
pub fn save_keystone_table(model: &KeystoneModel, path: &Path) -> Result<()> {
    let mut out = String::from("band,column,dx,dy\n");
    for band in 0..model.n_bands {
        if band == model.reference_band {
            continue;
        }
        for col in 0..model.n_cols {
            let (dx, dy) = model.shift(band, col);
            out.push_str(&format!("{band},{col},{dx},{dy}\n"));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
