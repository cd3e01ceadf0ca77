//! Synthetic scene generation for end-to-end tests and benchmarks.
//!
//! A [`SceneSpec`] describes a high-resolution ground-truth phantom, a set of
//! spectral channels (per-band gain, blur, and keystone shift), and a noise
//! level. [`generate`] renders the phantom, pushes it through the exact same
//! channel operators the reconstruction uses, and returns the observed
//! low-resolution cube together with the models that produced it. There is no
//! second code path for the forward simulation: each observed band is
//! literally `ChannelModel::forward(truth)` plus drawn noise, so solver tests
//! can check residuals down to the last bit.
//!
//! Generation is deterministic: the same spec (including its seed) always
//! produces the same scene, and runs single-threaded so the draw order never
//! depends on scheduling.

use crate::error::{Error, Result};
use crate::operators::{
    compute_spectral_coefficients, convolve, make_gaussian_psf, make_rect_psf,
    register_to_reference, Channel, ChannelModel, Psf, SpectralCoeffMap,
};
use crate::raster::{HyperCube, ImageGrid, KeystoneModel};
use crate::rng;

// ---------------------------------------------------------------------------
// Deterministic stream layout
// ---------------------------------------------------------------------------

// Counter-based draws are keyed by (seed, stream, counter). Each consumer of
// randomness in this module owns a fixed stream so adding a new one can never
// shift the values of an existing one.
const TEXTURE_ROW_STREAM: u64 = 11;
const TEXTURE_COL_STREAM: u64 = 12;
const EDGES_RECT_HEIGHT_STREAM: u64 = 21;
const EDGES_RECT_WIDTH_STREAM: u64 = 22;
const EDGES_RECT_ROW_STREAM: u64 = 23;
const EDGES_RECT_COL_STREAM: u64 = 24;
const EDGES_RECT_LEVEL_STREAM: u64 = 25;
const EDGES_FIELD_STREAM: u64 = 31;
const NOISE_STREAM_BASE: u64 = 1 << 32;

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

/// Ground-truth test pattern families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// Two-valued checkerboard with a period of 2 pixels.
    Checker,
    /// Vertical bars whose period steps from 2 to 8 pixels across the image.
    Bars,
    /// `v(r, c) = r * cols + c`, handy for indexing and adjoint checks.
    Ramp,
    /// Sparse bright 2x2 blocks on a flat background; point-like content that
    /// blind kernel estimation can identify.
    Texture,
    /// Landscape-like reconstruction target: a band-limited rectangle mosaic
    /// over a diagonal illumination ramp, with a narrowband vertical texture
    /// field and borders tapered to the scene mean. Step edges at many scales
    /// without content beyond what sub-pixel-shifted observations can carry.
    Edges,
}

/// Render a named phantom at the requested size.
///
/// All kinds produce strictly positive values so the result can be used as a
/// radiance field. Only `Texture` consumes the seed; the other kinds are
/// fully determined by their size.
pub fn make_phantom(kind: PhantomKind, rows: usize, cols: usize, seed: u64) -> Result<ImageGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("phantom", "size must be at least 1x1"));
    }
    match kind {
        PhantomKind::Checker => {
            Ok(ImageGrid::from_fn(rows, cols, |r, c| if (r + c) % 2 == 0 { 30.0 } else { 70.0 }))
        }
        PhantomKind::Bars => Ok(bars_phantom(rows, cols)),
        PhantomKind::Ramp => Ok(ImageGrid::from_fn(rows, cols, |r, c| (r * cols + c) as f64)),
        PhantomKind::Texture => texture_phantom(rows, cols, seed),
        PhantomKind::Edges => Ok(edges_phantom(rows, cols, seed)),
    }
}

/// Vertical two-valued bars. The image is split into seven column segments
/// and segment `s` carries bars of period `s + 2` pixels, so periods 2
/// through 8 all appear (in images at least 7 columns wide).
fn bars_phantom(rows: usize, cols: usize) -> ImageGrid {
    ImageGrid::from_fn(rows, cols, |_, c| {
        let seg = (c * 7 / cols).min(6);
        let period = seg + 2;
        // First column of this segment, so every segment starts on a bright
        // bar regardless of where the previous period ended.
        let seg_start = (seg * cols + 6) / 7;
        if (c - seg_start) % period < period / 2 + period % 2 {
            75.0
        } else {
            25.0
        }
    })
}

/// Background 20 plus `rows * cols / 40` disjoint 2x2 blocks raised to 100.
///
/// Placement is rejection-sampled from the seeded streams: a candidate block
/// is kept only when all four of its pixels are still background, so every
/// seed places exactly the same number of bright pixels and the image mean is
/// identical across seeds.
fn texture_phantom(rows: usize, cols: usize, seed: u64) -> Result<ImageGrid> {
    const BACKGROUND: f64 = 20.0;
    const BLOCK: f64 = 100.0;
    let target = rows * cols / 40;
    if target > 0 && (rows < 2 || cols < 2) {
        return Err(Error::invalid("phantom", "texture blocks need at least 2x2 pixels"));
    }
    let mut img = ImageGrid::constant(rows, cols, BACKGROUND);
    let mut placed = 0usize;
    let mut draw = 0u64;
    // Occupancy tops out at 10% of the image, so rejections are rare; the
    // budget only guards against a degenerate spec looping forever.
    let budget = 10_000 + 10_000 * target as u64;
    while placed < target {
        if draw >= budget {
            return Err(Error::invalid("phantom", "could not place texture blocks; image too small"));
        }
        let r = (rng::uniform(seed, TEXTURE_ROW_STREAM, draw) * (rows - 1) as f64) as usize;
        let c = (rng::uniform(seed, TEXTURE_COL_STREAM, draw) * (cols - 1) as f64) as usize;
        draw += 1;
        let free = (0..2).all(|dr| (0..2).all(|dc| img.get(r + dr, c + dc) == BACKGROUND));
        if free {
            for dr in 0..2 {
                for dc in 0..2 {
                    img.set(r + dr, c + dc, BLOCK);
                }
            }
            placed += 1;
        }
    }
    Ok(img)
}

/// Normalized Hann-windowed sinc taps; `cutoff` is in cycles per pixel.
fn windowed_sinc_taps(cutoff: f64, radius: usize) -> Vec<f64> {
    let n = 2 * radius + 1;
    let taps: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 - radius as f64;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * x).sin() / (std::f64::consts::PI * x)
            };
            let hann = 0.5 + 0.5 * (std::f64::consts::PI * x / (radius as f64 + 1.0)).cos();
            sinc * hann
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable low-pass kernel with independent vertical and horizontal
/// cutoffs, as the outer product of two windowed-sinc tap vectors.
fn lowpass_kernel(cut_v: f64, cut_h: f64, radius: usize) -> Psf {
    let v = windowed_sinc_taps(cut_v, radius);
    let h = windowed_sinc_taps(cut_h, radius);
    let n = 2 * radius + 1;
    let mut taps = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            taps.push(v[r] * h[c]);
        }
    }
    Psf::new(n, n, radius, radius, taps).expect("lowpass kernel dimensions are consistent")
}

/// Axis-aligned rectangles with log-uniform sizes on a flat background, so
/// small rectangles act as point-like detail and large ones as flat regions.
fn rect_mosaic(
    rows: usize,
    cols: usize,
    seed: u64,
    count: usize,
    min_sz: usize,
    max_sz: usize,
    lo: f64,
    hi: f64,
) -> ImageGrid {
    let bg = lo + 0.12 * (hi - lo);
    let mut img = ImageGrid::constant(rows, cols, bg);
    let log_min = (min_sz as f64).ln();
    let log_max = (max_sz as f64).ln();
    for i in 0..count {
        let d = i as u64;
        let draw_size = |stream: u64| -> usize {
            let u = rng::uniform(seed, stream, d);
            (log_min + u * (log_max - log_min)).exp().round() as usize
        };
        let h = draw_size(EDGES_RECT_HEIGHT_STREAM).min(rows);
        let w = draw_size(EDGES_RECT_WIDTH_STREAM).min(cols);
        let r0 = (rng::uniform(seed, EDGES_RECT_ROW_STREAM, d) * (rows - h) as f64) as usize;
        let c0 = (rng::uniform(seed, EDGES_RECT_COL_STREAM, d) * (cols - w) as f64) as usize;
        let level = lo + (hi - lo) * rng::uniform(seed, EDGES_RECT_LEVEL_STREAM, d);
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                img.set(r, c, level);
            }
        }
    }
    img
}

/// Zero-mean unit-RMS texture, band-passed to [`f_lo`, `f_hi`] cycles/px
/// vertically and low-passed to `f_h` horizontally: seeded white noise
/// filtered twice, with the difference keeping only the passband.
fn banded_field(
    rows: usize,
    cols: usize,
    seed: u64,
    f_lo: f64,
    f_hi: f64,
    f_h: f64,
    radius: usize,
) -> ImageGrid {
    let white = ImageGrid::from_fn(rows, cols, |r, c| {
        rng::uniform(seed, EDGES_FIELD_STREAM, (r * cols + c) as u64) - 0.5
    });
    let wide = convolve(&white, &lowpass_kernel(f_hi, f_h, radius))
        .expect("kernel fits after radius clamping");
    let narrow = convolve(&white, &lowpass_kernel(f_lo, f_h, radius))
        .expect("kernel fits after radius clamping");
    let band = wide.zip_map(&narrow, |a, b| a - b);
    let mean = band.mean();
    let rms = band.map(|v| (v - mean) * (v - mean)).mean().sqrt();
    if rms == 0.0 {
        return ImageGrid::constant(rows, cols, 0.0);
    }
    band.map(|v| (v - mean) / rms)
}

// Edges phantom content parameters. Levels and spans were chosen together so
// the result stays strictly positive: the mosaic never leaves [35, 65], the
// texture field swings a few times +/-8 around it, and the ramp only adds.
const EDGES_LEVEL_LO: f64 = 35.0;
const EDGES_LEVEL_HI: f64 = 65.0;
const EDGES_FIELD_RMS: f64 = 8.0;
const EDGES_RAMP_SPAN: f64 = 300.0;

/// Render the `Edges` phantom. Composition, at any size:
///
/// 1. rectangle mosaic, band-limited to 0.30 cycles/px vertically and 0.12
///    horizontally so its edges survive 2x decimation of shifted copies;
/// 2. plus a narrowband vertical texture field (0.24..0.28 cycles/px), the
///    detail that separates a true super-resolver from an upsampler;
/// 3. plus a diagonal illumination ramp;
/// 4. borders tapered to the scene mean so replicate-padding effects at the
///    image edge do not dominate any measurement made on the result.
fn edges_phantom(rows: usize, cols: usize, seed: u64) -> ImageGrid {
    let min_dim = rows.min(cols);
    let count = (rows * cols * 36 / 16384).max(4);
    let max_sz = (min_dim * 5 / 16).clamp(4, min_dim.max(4));
    let min_sz = 3.min(max_sz - 1).max(1);
    // Kernels cannot exceed the image, so shrink them on small grids.
    let fit = |radius: usize| radius.min(min_dim.saturating_sub(1) / 2);
    let mosaic = rect_mosaic(rows, cols, seed, count, min_sz, max_sz, EDGES_LEVEL_LO, EDGES_LEVEL_HI);
    let smooth = convolve(&mosaic, &lowpass_kernel(0.30, 0.12, fit(16)))
        .expect("kernel fits after radius clamping");
    let field = banded_field(rows, cols, seed, 0.24, 0.28, 0.10, fit(20));
    let ramp_denom = (rows + cols).saturating_sub(2).max(1) as f64;
    let raw = ImageGrid::from_fn(rows, cols, |r, c| {
        smooth.get(r, c)
            + EDGES_FIELD_RMS * field.get(r, c)
            + EDGES_RAMP_SPAN * (r + c) as f64 / ramp_denom
    });
    let margin = (min_dim * 10 / 128).max(2);
    let mean = raw.mean();
    let ramp_up = |d: usize| -> f64 {
        let t = d.min(margin) as f64 / margin as f64;
        0.5 - 0.5 * (std::f64::consts::PI * t).cos()
    };
    ImageGrid::from_fn(rows, cols, |r, c| {
        let dr = r.min(rows - 1 - r);
        let dc = c.min(cols - 1 - c);
        mean + (raw.get(r, c) - mean) * ramp_up(dr) * ramp_up(dc)
    })
}

// ---------------------------------------------------------------------------
// Scene specification
// ---------------------------------------------------------------------------

/// Supported noise distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    Gaussian,
}

/// Additive noise drawn independently per pixel of every observed band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    /// Standard deviation in image units; 0 disables noise entirely.
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("noise", "sigma must be finite and >= 0"));
        }
        Ok(NoiseSpec { model: NoiseModel::Gaussian, sigma })
    }

    /// Noise-free spec.
    pub fn none() -> Self {
        NoiseSpec { model: NoiseModel::Gaussian, sigma: 0.0 }
    }
}

/// Per-band blur recipe, built into a [`Psf`] at generation time.
#[derive(Debug, Clone, PartialEq)]
pub enum PsfRecipe {
    /// No blur (a 1x1 delta kernel).
    Identity,
    /// Truncated, normalized Gaussian.
    Gaussian { sigma: f64, radius: usize },
    /// Uniform box average over `support` x `support` pixels.
    Rect { support: usize },
}

impl PsfRecipe {
    fn build(&self) -> Result<Psf> {
        match *self {
            PsfRecipe::Identity => Ok(Psf::identity()),
            PsfRecipe::Gaussian { sigma, radius } => make_gaussian_psf(sigma, radius),
            PsfRecipe::Rect { support } => make_rect_psf(support),
        }
    }
}

/// How blur varies across the cube.
#[derive(Debug, Clone, PartialEq)]
pub enum PsfSpec {
    /// Every band shares one recipe.
    Uniform(PsfRecipe),
    /// One recipe per band, indexed by band number.
    PerBand(Vec<PsfRecipe>),
}

impl PsfSpec {
    fn recipe_for(&self, band: usize) -> &PsfRecipe {
        match self {
            PsfSpec::Uniform(recipe) => recipe,
            PsfSpec::PerBand(recipes) => &recipes[band],
        }
    }
}

/// Keystone geometry of the simulated instrument.
#[derive(Debug, Clone, PartialEq)]
pub enum KeystoneSpec {
    /// All bands perfectly registered.
    Zero,
    /// Column shift grows linearly from the swath center:
    /// `dx(band, col) = amplitude[band] * (col - center) / center`, and each
    /// band additionally rides a constant along-track offset
    /// `dy = line_offset[band]`. The reference band must carry zeros.
    Linear { amplitudes: Vec<f64>, line_offsets: Vec<f64>, reference_band: usize },
    /// Use a prebuilt shift table as-is.
    FromTable(KeystoneModel),
}

impl KeystoneSpec {
    /// A linear spread that reaches exactly `max_dx` low-resolution pixels of
    /// column shift (and half that of line offset) at the extreme bands,
    /// holding the middle band fixed as the zero-shift reference.
    pub fn linear_spread(n_bands: usize, max_dx: f64) -> Self {
        let reference_band = n_bands / 2;
        let mut amplitudes = vec![0.0; n_bands];
        let mut line_offsets = vec![0.0; n_bands];
        let others: Vec<usize> = (0..n_bands).filter(|&k| k != reference_band).collect();
        let steps = others.len();
        for (i, &k) in others.iter().enumerate() {
            let t = if steps > 1 { i as f64 / (steps - 1) as f64 } else { 0.5 };
            amplitudes[k] = -max_dx + 2.0 * max_dx * t;
            line_offsets[k] = -0.5 * max_dx + max_dx * t;
        }
        KeystoneSpec::Linear { amplitudes, line_offsets, reference_band }
    }

    fn build(&self, n_bands: usize, lr_cols: usize) -> Result<KeystoneModel> {
        match self {
            KeystoneSpec::Zero => KeystoneModel::zero(n_bands, lr_cols, 0),
            KeystoneSpec::Linear { amplitudes, line_offsets, reference_band } => {
                if amplitudes.len() != n_bands || line_offsets.len() != n_bands {
                    return Err(Error::invalid(
                        "keystone",
                        format!(
                            "linear keystone needs {n_bands} amplitudes and line offsets, \
                             got {} and {}",
                            amplitudes.len(),
                            line_offsets.len()
                        ),
                    ));
                }
                if lr_cols < 2 {
                    return Err(Error::invalid(
                        "keystone",
                        "linear keystone needs at least 2 output columns",
                    ));
                }
                let center = (lr_cols - 1) as f64 / 2.0;
                KeystoneModel::from_fn(n_bands, lr_cols, *reference_band, |band, col| {
                    let dx = amplitudes[band] * (col as f64 - center) / center;
                    (dx, line_offsets[band])
                })
            }
            KeystoneSpec::FromTable(model) => {
                if model.n_bands() != n_bands || model.n_cols() != lr_cols {
                    return Err(Error::invalid(
                        "keystone",
                        format!(
                            "table is {} bands x {} columns, scene needs {} x {}",
                            model.n_bands(),
                            model.n_cols(),
                            n_bands,
                            lr_cols
                        ),
                    ));
                }
                Ok(model.clone())
            }
        }
    }
}

/// Complete description of a synthetic acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Ground-truth size; both must be divisible by `scale`.
    pub hr_rows: usize,
    pub hr_cols: usize,
    /// Down-sampling factor from truth to the observed bands.
    pub scale: usize,
    pub n_bands: usize,
    pub phantom: PhantomKind,
    /// Per-band radiometric gain applied to the truth, all > 0.
    pub band_gains: Vec<f64>,
    pub keystone: KeystoneSpec,
    pub psf: PsfSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl SceneSpec {
    /// Check every cross-field invariant. [`generate`] calls this first, so
    /// manual calls are only needed to validate a spec without running it.
    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::invalid("scale", "must be >= 1"));
        }
        if self.hr_rows == 0 || self.hr_cols == 0 {
            return Err(Error::invalid("scene", "truth must be at least 1x1"));
        }
        if self.hr_rows % self.scale != 0 || self.hr_cols % self.scale != 0 {
            return Err(Error::invalid(
                "scene",
                format!(
                    "truth size {}x{} is not divisible by scale {}",
                    self.hr_rows, self.hr_cols, self.scale
                ),
            ));
        }
        if self.n_bands == 0 {
            return Err(Error::invalid("scene", "need at least one band"));
        }
        if self.band_gains.len() != self.n_bands {
            return Err(Error::invalid(
                "band_gains",
                format!("{} gains for {} bands", self.band_gains.len(), self.n_bands),
            ));
        }
        if let Some(&g) = self.band_gains.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::invalid("band_gains", format!("gain {g} is not positive and finite")));
        }
        if let PsfSpec::PerBand(recipes) = &self.psf {
            if recipes.len() != self.n_bands {
                return Err(Error::invalid(
                    "psf",
                    format!("{} recipes for {} bands", recipes.len(), self.n_bands),
                ));
            }
        }
        if !(self.noise.sigma >= 0.0) || !self.noise.sigma.is_finite() {
            return Err(Error::invalid("noise", "sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Everything [`generate`] produced, truth included.
#[derive(Debug, Clone)]
pub struct GeneratedScene {
    /// High-resolution ground truth.
    pub truth: ImageGrid,
    /// Observed low-resolution cube (noise applied).
    pub cube: HyperCube,
    /// The same cube before noise.
    pub noiseless: HyperCube,
    /// Shift table shared by all channel models.
    pub keystone: KeystoneModel,
    /// Spectral coefficient planes, one per band, from the registered
    /// noiseless radiances.
    pub coeffs: SpectralCoeffMap,
    /// Per-band forward models; `cube.band(k)` is `models[k]` applied to
    /// `truth` plus noise, bit for bit.
    pub models: Vec<ChannelModel>,
}

impl GeneratedScene {
    /// Pair each observed band with its model, ready for the solver.
    pub fn channels(&self) -> Result<Vec<Channel>> {
        self.cube
            .bands()
            .iter()
            .zip(&self.models)
            .map(|(band, model)| Channel::new(band.clone(), model.clone()))
            .collect()
    }
}

/// Simulate one acquisition.
///
/// The phantom is rendered at high resolution, blurred, shifted, and
/// decimated once per band through [`ChannelModel::forward`] with unit
/// coefficients to obtain the noiseless radiance of each band. Spectral
/// coefficients then come from those radiances after registration to the
/// reference band, the final per-band models are assembled from them, and
/// the observed cube is each model's forward output plus Gaussian noise.
pub fn generate(spec: &SceneSpec) -> Result<GeneratedScene> {
    spec.validate()?;
    let truth = make_phantom(spec.phantom, spec.hr_rows, spec.hr_cols, spec.seed)?;
    let lr_rows = spec.hr_rows / spec.scale;
    let lr_cols = spec.hr_cols / spec.scale;
    let keystone = spec.keystone.build(spec.n_bands, lr_cols)?;

    let psfs: Vec<Psf> = (0..spec.n_bands)
        .map(|k| spec.psf.recipe_for(k).build())
        .collect::<Result<_>>()?;

    // Unit-coefficient forward pass: the pure geometric and blur response of
    // each band, scaled by its gain. These radiances define the spectral
    // coefficients, so the final models reproduce them exactly.
    let ones = ImageGrid::constant(lr_rows, lr_cols, 1.0);
    let mut radiances = Vec::with_capacity(spec.n_bands);
    for k in 0..spec.n_bands {
        let unit = ChannelModel::new(k, psfs[k].clone(), &keystone, spec.scale, ones.clone())?;
        let gain = spec.band_gains[k];
        radiances.push(unit.forward(&truth)?.map(|v| v * gain));
    }
    let registered = register_to_reference(&HyperCube::new(radiances)?, &keystone)?;
    let coeffs = compute_spectral_coefficients(&registered)?;

    let models: Vec<ChannelModel> = (0..spec.n_bands)
        .map(|k| ChannelModel::new(k, psfs[k].clone(), &keystone, spec.scale, coeffs.band(k).clone()))
        .collect::<Result<_>>()?;

    let noiseless_bands: Vec<ImageGrid> =
        models.iter().map(|m| m.forward(&truth)).collect::<Result<_>>()?;

    let sigma = spec.noise.sigma;
    let noisy_bands: Vec<ImageGrid> = noiseless_bands
        .iter()
        .enumerate()
        .map(|(k, band)| {
            if sigma == 0.0 {
                return band.clone();
            }
            let stream = NOISE_STREAM_BASE + k as u64;
            let cols = band.cols();
            ImageGrid::from_fn(band.rows(), cols, |r, c| {
                let n = rng::normal(spec.seed, stream, (r * cols + c) as u64);
                band.get(r, c) + sigma * n
            })
        })
        .collect();

    Ok(GeneratedScene {
        truth,
        cube: HyperCube::new(noisy_bands)?,
        noiseless: HyperCube::new(noiseless_bands)?,
        keystone,
        coeffs,
        models,
    })
}

// ---------------------------------------------------------------------------
// Noise sizing helpers
// ---------------------------------------------------------------------------

/// Standard deviation that realizes `snr_db` of signal-variance-to-noise
/// ratio against the mean band variance of `bands`.
pub fn sigma_for_snr(bands: &[ImageGrid], snr_db: f64) -> Result<f64> {
    if bands.is_empty() {
        return Err(Error::invalid("bands", "need at least one band"));
    }
    let mean_var = bands.iter().map(|b| b.variance()).sum::<f64>() / bands.len() as f64;
    if mean_var <= 0.0 {
        return Err(Error::invalid("bands", "constant bands have no signal to set an SNR against"));
    }
    Ok((mean_var / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Realized signal-to-noise ratio in dB: variance of `clean` over the mean
/// squared difference. Infinite when the two images are identical.
pub fn measured_snr_db(clean: &ImageGrid, noisy: &ImageGrid) -> Result<f64> {
    if clean.shape() != noisy.shape() {
        return Err(Error::dims("snr", clean.shape(), noisy.shape()));
    }
    let n = clean.data().len() as f64;
    let noise_power = clean
        .data()
        .iter()
        .zip(noisy.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if noise_power == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (clean.variance() / noise_power).log10())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
