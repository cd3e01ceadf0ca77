//! The linear acquisition model and its building blocks.
//!
//! Each observed low-resolution channel `Y_k` is modelled from one shared
//! high-resolution image `x` (a panchromatic-equivalent intensity covering the
//! instrument's full spectral range) as
//!
//! ```text
//! Y_k = S_k . D( M_k( B_k(x) ) ) + noise
//! ```
//!
//! where `B_k` blurs at high resolution, `M_k` applies the per-column keystone
//! shift (scaled to high-resolution pixels), `D` decimates by the integer
//! scale, and `S_k` multiplies pointwise by the band's spectral coefficient
//! map. [`ChannelModel::forward`] applies the chain; [`ChannelModel::adjoint`]
//! applies the exact transpose, which the reconstruction solver relies on.

mod conv;
mod psf;
mod sample;
mod warp;

pub use conv::{convolve, convolve_adjoint};
pub use psf::{compose_psfs, make_gaussian_psf, make_rect_psf, Psf};
pub use sample::{decimate, decimate_adjoint, upsample_bicubic, upsample_bilinear};
pub use warp::{warp_shift, warp_shift_adjoint};

use crate::error::{Error, Result};
use crate::raster::{HyperCube, ImageGrid, KeystoneModel};

/// Pixels whose radiance sum falls below this are treated as degenerate when
/// building spectral coefficients.
pub const RADIANCE_SUM_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Spectral coefficients
// ---------------------------------------------------------------------------

/// Per-band, per-pixel fraction of the total (panchromatic-equivalent)
/// radiance carried by that band. Coefficients lie in `(0, 1]` and sum to 1
/// across bands at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffMap {
    bands: Vec<ImageGrid>,
}

impl SpectralCoeffMap {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, k: usize) -> &ImageGrid {
        &self.bands[k]
    }

    pub fn bands(&self) -> &[ImageGrid] {
        &self.bands
    }

    pub fn into_bands(self) -> Vec<ImageGrid> {
        self.bands
    }
}

/// Build coefficient maps from a cube whose bands are already registered to
/// the reference geometry:
///
/// `S_k(i) = I_k(i) / sum over bands j of I_j(i)`
///
/// so the maps sum to exactly 1 per pixel. Radiance must be strictly positive;
/// real data should be floored before calling (the synthetic generator never
/// produces non-positive radiance).
pub fn compute_spectral_coefficients(registered: &HyperCube) -> Result<SpectralCoeffMap> {
    let (rows, cols) = (registered.rows(), registered.cols());
    for (k, band) in registered.bands().iter().enumerate() {
        if let Some(i) = band.data().iter().position(|&v| v <= 0.0) {
            return Err(Error::DegenerateRadiance {
                band: Some(k),
                row: i / cols,
                col: i % cols,
            });
        }
    }

    let mut total = vec![0.0; rows * cols];
    for band in registered.bands() {
        for (t, &v) in total.iter_mut().zip(band.data()) {
            *t += v;
        }
    }
    if let Some(i) = total.iter().position(|&t| t < RADIANCE_SUM_FLOOR) {
        return Err(Error::DegenerateRadiance { band: None, row: i / cols, col: i % cols });
    }

    let bands = registered
        .bands()
        .iter()
        .map(|band| {
            let data = band.data().iter().zip(&total).map(|(&v, &t)| v / t).collect();
            ImageGrid::from_raw(rows, cols, data)
        })
        .collect();
    Ok(SpectralCoeffMap { bands })
}

/// Warp every band back onto the reference band's geometry by applying the
/// negated keystone shifts. The reference band is returned unchanged.
pub fn register_to_reference(cube: &HyperCube, keystone: &KeystoneModel) -> Result<HyperCube> {
    if keystone.n_bands() != cube.n_bands() {
        return Err(Error::invalid(
            "keystone",
            format!("{} bands in table, {} in cube", keystone.n_bands(), cube.n_bands()),
        ));
    }
    if keystone.n_cols() != cube.cols() {
        return Err(Error::invalid(
            "keystone",
            format!("{} columns in table, {} in cube", keystone.n_cols(), cube.cols()),
        ));
    }
    let mut bands = Vec::with_capacity(cube.n_bands());
    for k in 0..cube.n_bands() {
        if k == keystone.reference_band() {
            bands.push(cube.band(k).clone());
        } else {
            bands.push(warp_shift(cube.band(k), &keystone.negated_column_shifts(k))?);
        }
    }
    HyperCube::new(bands)
}

// ---------------------------------------------------------------------------
// Channel model
// ---------------------------------------------------------------------------

/// Everything needed to map the high-resolution image to one observed band.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    band: usize,
    psf: Psf,
    scale: usize,
    /// Per high-resolution column `(dx, dy)`, already scaled by `scale`:
    /// column `C` inherits the low-resolution shift of column `C / scale`.
    hr_shifts: Vec<(f64, f64)>,
    /// Low-resolution coefficient map for this band.
    coeffs: ImageGrid,
}

impl ChannelModel {
    /// Assemble the model for `band`. `coeffs` is that band's spectral
    /// coefficient plane at low resolution, `psf` the high-resolution blur.
    pub fn new(
        band: usize,
        psf: Psf,
        keystone: &KeystoneModel,
        scale: usize,
        coeffs: ImageGrid,
    ) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("scale", "must be >= 1"));
        }
        if band >= keystone.n_bands() {
            return Err(Error::invalid(
                "band",
                format!("{band} out of range for keystone table with {} bands", keystone.n_bands()),
            ));
        }
        if keystone.n_cols() != coeffs.cols() {
            return Err(Error::invalid(
                "keystone",
                format!("{} table columns, {} coefficient columns", keystone.n_cols(), coeffs.cols()),
            ));
        }
        if let Some(i) = coeffs.data().iter().position(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::invalid(
                "coeffs",
                format!(
                    "coefficient {} at ({}, {}) outside (0, 1]",
                    coeffs.data()[i],
                    i / coeffs.cols(),
                    i % coeffs.cols()
                ),
            ));
        }

        let s = scale as f64;
        let hr_shifts = (0..coeffs.cols() * scale)
            .map(|hc| {
                let (dx, dy) = keystone.shift(band, hc / scale);
                (dx * s, dy * s)
            })
            .collect();

        Ok(ChannelModel { band, psf, scale, hr_shifts, coeffs })
    }

    #[inline]
    pub fn band(&self) -> usize {
        self.band
    }

    #[inline]
    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn psf(&self) -> &Psf {
        &self.psf
    }

    pub fn coeffs(&self) -> &ImageGrid {
        &self.coeffs
    }

    /// True when every column shift is exactly zero, i.e. this band sits in
    /// the reference geometry.
    pub fn has_zero_shifts(&self) -> bool {
        self.hr_shifts.iter().all(|&(dx, dy)| dx == 0.0 && dy == 0.0)
    }

    /// Low-resolution output shape.
    pub fn lr_shape(&self) -> (usize, usize) {
        self.coeffs.shape()
    }

    /// High-resolution input shape.
    pub fn hr_shape(&self) -> (usize, usize) {
        (self.coeffs.rows() * self.scale, self.coeffs.cols() * self.scale)
    }

    fn check_hr(&self, x: &ImageGrid) -> Result<()> {
        if x.shape() != self.hr_shape() {
            return Err(Error::dims(
                format!("channel {} forward input", self.band),
                self.hr_shape(),
                x.shape(),
            ));
        }
        Ok(())
    }

    /// `S_k . D(M_k(B_k(x)))`.
    pub fn forward(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.check_hr(x)?;
        let blurred = convolve(x, &self.psf)?;
        let warped = warp_shift(&blurred, &self.hr_shifts)?;
        let low = decimate(&warped, self.scale)?;
        Ok(low.zip_map(&self.coeffs, |v, s| v * s))
    }

    /// Exact transpose of [`ChannelModel::forward`].
    pub fn adjoint(&self, y: &ImageGrid) -> Result<ImageGrid> {
        if y.shape() != self.lr_shape() {
            return Err(Error::dims(
                format!("channel {} adjoint input", self.band),
                self.lr_shape(),
                y.shape(),
            ));
        }
        let scaled = y.zip_map(&self.coeffs, |v, s| v * s);
        let fine = decimate_adjoint(&scaled, self.scale)?;
        let unwarped = warp_shift_adjoint(&fine, &self.hr_shifts)?;
        convolve_adjoint(&unwarped, &self.psf)
    }
}

/// One observed band paired with its acquisition model; the unit the solver
/// and the comparison harness consume.
#[derive(Debug, Clone)]
pub struct Channel {
    pub observed: ImageGrid,
    pub model: ChannelModel,
}

impl Channel {
    pub fn new(observed: ImageGrid, model: ChannelModel) -> Result<Self> {
        if observed.shape() != model.lr_shape() {
            return Err(Error::dims(
                format!("channel {} observation", model.band()),
                model.lr_shape(),
                observed.shape(),
            ));
        }
        Ok(Channel { observed, model })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_grid(rows: usize, cols: usize, seed: u64) -> ImageGrid {
        let mut i = 0;
        ImageGrid::from_fn(rows, cols, |_, _| {
            i += 1;
            rng::uniform(seed, 11, i) * 80.0 + 10.0
        })
    }

    fn linear_keystone(n_bands: usize, n_cols: usize, reference: usize) -> KeystoneModel {
        KeystoneModel::from_fn(n_bands, n_cols, reference, |b, c| {
            if b == reference {
                return (0.0, 0.0);
            }
            let center = (n_cols as f64 - 1.0) / 2.0;
            let a = 0.5 * (b as f64 - reference as f64) / n_bands as f64;
            (a * (c as f64 - center) / center.max(1.0), 0.1 * (b as f64 - reference as f64))
        })
        .unwrap()
    }

    #[test]
    fn equal_bands_give_uniform_coefficients() {
        let cube = HyperCube::new(vec![ImageGrid::constant(3, 3, 5.0); 4]).unwrap();
        let coeffs = compute_spectral_coefficients(&cube).unwrap();
        for k in 0..4 {
            for &v in coeffs.band(k).data() {
                assert!((v - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn three_to_one_radiance_ratio_splits_three_quarters_to_one_quarter() {
        let a = ImageGrid::constant(2, 2, 30.0);
        let b = ImageGrid::constant(2, 2, 10.0);
        let coeffs = compute_spectral_coefficients(&HyperCube::new(vec![a, b]).unwrap()).unwrap();
        for &v in coeffs.band(0).data() {
            assert!((v - 0.75).abs() < 1e-15);
        }
        for &v in coeffs.band(1).data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficients_sum_to_one_per_pixel() {
        let bands: Vec<ImageGrid> = (0..4).map(|k| random_grid(5, 5, k)).collect();
        let coeffs =
            compute_spectral_coefficients(&HyperCube::new(bands).unwrap()).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                let sum: f64 = (0..4).map(|k| coeffs.band(k).get(r, c)).sum();
                assert!((sum - 1.0).abs() < 1e-9, "pixel ({r},{c}) sums to {sum}");
                for k in 0..4 {
                    let v = coeffs.band(k).get(r, c);
                    assert!(v > 0.0 && v <= 1.0);
                }
            }
        }
    }

    #[test]
    fn non_positive_radiance_is_rejected() {
        let a = ImageGrid::constant(2, 2, 1.0);
        let mut b = ImageGrid::constant(2, 2, 1.0);
        b.set(1, 0, 0.0);
        let err =
            compute_spectral_coefficients(&HyperCube::new(vec![a, b]).unwrap()).unwrap_err();
        match err {
            Error::DegenerateRadiance { band: Some(1), row: 1, col: 0 } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn registration_inverts_the_keystone_warp_approximately() {
        // Warp a smooth band forward, register it back, compare interior.
        let img = ImageGrid::from_fn(12, 12, |r, c| {
            50.0 + 10.0 * ((r as f64) * 0.4).sin() + 8.0 * ((c as f64) * 0.3).cos()
        });
        let keystone = linear_keystone(3, 12, 1);
        let warped = warp_shift(&img, &keystone.column_shifts(2)).unwrap();
        let cube = HyperCube::new(vec![img.clone(), img.clone(), warped]).unwrap();
        let registered = register_to_reference(&cube, &keystone).unwrap();
        for r in 2..10 {
            for c in 2..10 {
                let diff = (registered.band(2).get(r, c) - img.get(r, c)).abs();
                assert!(diff < 0.6, "({r},{c}): residual {diff}");
            }
        }
        // Reference band passes through untouched.
        assert_eq!(registered.band(1), &img);
    }

    #[test]
    fn identity_channel_is_the_identity_map() {
        let keystone = KeystoneModel::zero(1, 6, 0).unwrap();
        let model = ChannelModel::new(
            0,
            Psf::identity(),
            &keystone,
            1,
            ImageGrid::constant(6, 6, 1.0),
        )
        .unwrap();
        let x = random_grid(6, 6, 9);
        assert_eq!(model.forward(&x).unwrap(), x);
        assert_eq!(model.adjoint(&x).unwrap(), x);
    }

    #[test]
    fn uniform_half_coefficients_scale_the_output() {
        let keystone = KeystoneModel::zero(1, 4, 0).unwrap();
        let model = ChannelModel::new(
            0,
            Psf::identity(),
            &keystone,
            1,
            ImageGrid::constant(4, 4, 0.5),
        )
        .unwrap();
        let x = random_grid(4, 4, 2);
        let y = model.forward(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficients_outside_unit_interval_are_rejected() {
        let keystone = KeystoneModel::zero(1, 4, 0).unwrap();
        for bad in [0.0, -0.1, 1.5] {
            let grid = ImageGrid::from_fn(4, 4, |r, c| if (r, c) == (0, 0) { bad } else { 0.5 });
            assert!(
                ChannelModel::new(0, Psf::identity(), &keystone, 1, grid).is_err(),
                "coefficient {bad} must be rejected"
            );
        }
    }

    #[test]
    fn forward_is_linear() {
        let keystone = linear_keystone(2, 6, 0);
        let coeffs = random_grid(6, 6, 20).map(|v| v / 200.0 + 0.2);
        let model = ChannelModel::new(1, make_rect_psf(2).unwrap(), &keystone, 2, coeffs).unwrap();
        let x1 = random_grid(12, 12, 3);
        let x2 = random_grid(12, 12, 4);
        let combo = x1.zip_map(&x2, |a, b| 2.0 * a - 0.5 * b);
        let lhs = model.forward(&combo).unwrap();
        let f1 = model.forward(&x1).unwrap();
        let f2 = model.forward(&x2).unwrap();
        for ((l, a), b) in lhs.data().iter().zip(f1.data()).zip(f2.data()) {
            assert!((l - (2.0 * a - 0.5 * b)).abs() < 1e-10);
        }
    }

    #[test]
    fn forward_and_adjoint_satisfy_the_dot_product_identity() {
        for seed in 0..10 {
            let keystone = linear_keystone(3, 8, 1);
            let coeffs = random_grid(8, 8, seed + 60).map(|v| v / 300.0 + 0.1);
            let model =
                ChannelModel::new(2, make_rect_psf(2).unwrap(), &keystone, 2, coeffs).unwrap();
            let x = random_grid(16, 16, seed);
            let y = random_grid(8, 8, seed + 30);
            let lhs = model.forward(&x).unwrap().dot(&y);
            let rhs = x.dot(&model.adjoint(&y).unwrap());
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!(((lhs - rhs) / scale).abs() < 1e-10, "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn forward_matches_an_explicit_matrix_product() {
        // Build S * D * M * B as dense matrices straight from the documented
        // tap rules and compare the composite against the implementation.
        let n_hr = 8usize;
        let scale = 2usize;
        let n_lr = n_hr / scale;
        let keystone = linear_keystone(2, n_lr, 0);
        let coeffs = random_grid(n_lr, n_lr, 42).map(|v| v / 160.0 + 0.3);
        let psf = make_rect_psf(2).unwrap();
        let model = ChannelModel::new(1, psf.clone(), &keystone, scale, coeffs.clone()).unwrap();

        let hr_len = n_hr * n_hr;
        let lr_len = n_lr * n_lr;
        let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;

        // B: blur at high resolution.
        let mut b = vec![vec![0.0; hr_len]; hr_len];
        let (ar, ac) = psf.anchor();
        for r in 0..n_hr {
            for c in 0..n_hr {
                for i in 0..psf.rows() {
                    for j in 0..psf.cols() {
                        let sr = clamp(r as i64 + ar as i64 - i as i64, n_hr);
                        let sc = clamp(c as i64 + ac as i64 - j as i64, n_hr);
                        b[r * n_hr + c][sr * n_hr + sc] += psf.weight(i, j);
                    }
                }
            }
        }
        // M: bilinear warp at high resolution with scaled shifts.
        let mut m = vec![vec![0.0; hr_len]; hr_len];
        for r in 0..n_hr {
            for c in 0..n_hr {
                let (dx_lr, dy_lr) = keystone.shift(1, c / scale);
                let (dx, dy) = (dx_lr * scale as f64, dy_lr * scale as f64);
                let sr = r as f64 + dy;
                let sc = c as f64 + dx;
                let r0 = sr.floor();
                let c0 = sc.floor();
                let (fr, fc) = (sr - r0, sc - c0);
                let pairs = [
                    (r0, c0, (1.0 - fr) * (1.0 - fc)),
                    (r0, c0 + 1.0, (1.0 - fr) * fc),
                    (r0 + 1.0, c0, fr * (1.0 - fc)),
                    (r0 + 1.0, c0 + 1.0, fr * fc),
                ];
                for (tr, tc, w) in pairs {
                    m[r * n_hr + c][clamp(tr as i64, n_hr) * n_hr + clamp(tc as i64, n_hr)] += w;
                }
            }
        }
        // Compose rows of (S D M B) by pushing unit low-res outputs backward.
        let x = random_grid(n_hr, n_hr, 5);
        let mut expected = vec![0.0; lr_len];
        for lr in 0..n_lr {
            for lc in 0..n_lr {
                // Row of D M B: D selects high-res pixel (lr*scale, lc*scale).
                let dr = lr * scale;
                let dc = lc * scale;
                let mut acc = 0.0;
                for h in 0..hr_len {
                    let mw = m[dr * n_hr + dc][h];
                    if mw != 0.0 {
                        for (xi, bw) in b[h].iter().enumerate() {
                            if *bw != 0.0 {
                                acc += mw * bw * x.data()[xi];
                            }
                        }
                    }
                }
                expected[lr * n_lr + lc] = acc * coeffs.get(lr, lc);
            }
        }

        let got = model.forward(&x).unwrap();
        for (idx, (a, e)) in got.data().iter().zip(&expected).enumerate() {
            assert!((a - e).abs() < 1e-10, "sample {idx}: {a} vs {e}");
        }
    }

    #[test]
    fn shape_mismatches_are_reported() {
        let keystone = KeystoneModel::zero(1, 4, 0).unwrap();
        let model = ChannelModel::new(
            0,
            Psf::identity(),
            &keystone,
            2,
            ImageGrid::constant(4, 4, 1.0),
        )
        .unwrap();
        assert!(model.forward(&ImageGrid::zeros(4, 4)).is_err());
        assert!(model.adjoint(&ImageGrid::zeros(8, 8)).is_err());
        assert!(Channel::new(ImageGrid::zeros(8, 8), model).is_err());
    }
}
