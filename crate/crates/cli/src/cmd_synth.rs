//! `synth`: render a synthetic pushbroom acquisition to disk.
//!
//! The config describes the scene (truth size, bands, phantom), per-band
//! gains, the keystone geometry, the blur kernel, and the noise level; the
//! output directory receives the observed cube, the ground truth, the
//! keystone calibration CSV, the spectral coefficient planes, and a manifest
//! of every effective parameter. Fixed seeds make reruns bit-identical.
//!
//! Config schema (all keys optional unless noted):
//!
//! ```text
//! [scene]
//! hr_rows = 64          # truth rows, divisible by scale
//! hr_cols = 64          # truth cols, divisible by scale
//! scale = 2             # decimation factor truth -> observed
//! bands = 4             # number of spectral channels
//! phantom = edges       # checker | bars | ramp | texture | edges
//! seed = 0              # master seed (overridden by --seed)
//!
//! [gains]
//! uniform = 1.0         # gain for every band not listed below
//! band0 = 10.0          # per-band override, any number of these
//!
//! [keystone]
//! model = linear        # zero | linear | table
//! max_dx = 0.3          # linear: symmetric spread shorthand, LR pixels
//! amplitudes = ...      # linear: explicit per-band comma list (alternative)
//! line_offsets = ...    # linear: per-band along-track offsets (with amplitudes)
//! reference_band = 2    # linear: band that defines the frame (default middle)
//! path = shifts.csv     # table: load a measured table instead
//!
//! [psf]
//! model = rect          # identity | gaussian | rect
//! sigma = 0.7           # gaussian only (required there)
//! radius = 2            # gaussian only (default 3*sigma rounded up)
//! support = 2           # rect only (default = scale)
//!
//! [noise]
//! sigma = 0.0           # absolute noise level, or:
//! snr_db = 40.0         # pick sigma to hit this SNR against the clean cube
//! ```

use std::fs;
use std::path::Path;

use keysr_core::error::{Error, Result};
use keysr_core::raster::{load_keystone_table, save_cube, save_keystone_table};
use keysr_core::synth::{
    generate, sigma_for_snr, KeystoneSpec, NoiseSpec, PhantomKind, PsfRecipe, PsfSpec, SceneSpec,
};
use keysr_core::HyperCube;

use crate::config::Config;
use crate::manifest::Manifest;
use crate::{Stage, StageError};

// ---------------------------------------------------------------------------
// Config -> SceneSpec
// ---------------------------------------------------------------------------

/// How the noise level was specified; SNR needs a dry run to realize sigma.
enum NoiseSetting {
    Sigma(f64),
    SnrDb(f64),
}

pub struct ParsedScene {
    pub spec: SceneSpec,
    noise: NoiseSetting,
    /// Echoed into the manifest when the table came from a file.
    table_path: Option<String>,
}

pub fn parse_scene(cfg: &Config, seed_override: Option<u64>) -> Result<ParsedScene> {
    cfg.check_sections(&["scene", "gains", "keystone", "psf", "noise"])?;
    cfg.check_keys("scene", &["hr_rows", "hr_cols", "scale", "bands", "phantom", "seed"])?;
    cfg.check_keys("gains", &["uniform", "band*"])?;
    cfg.check_keys(
        "keystone",
        &["model", "max_dx", "amplitudes", "line_offsets", "reference_band", "path"],
    )?;
    cfg.check_keys("psf", &["model", "sigma", "radius", "support"])?;
    cfg.check_keys("noise", &["sigma", "snr_db"])?;

    let hr_rows = cfg.usize_or("scene", "hr_rows", 64)?;
    let hr_cols = cfg.usize_or("scene", "hr_cols", 64)?;
    let scale = cfg.usize_or("scene", "scale", 2)?;
    let n_bands = cfg.usize_or("scene", "bands", 4)?;
    let phantom = match cfg.str_opt("scene", "phantom").unwrap_or("edges") {
        "checker" => PhantomKind::Checker,
        "bars" => PhantomKind::Bars,
        "ramp" => PhantomKind::Ramp,
        "texture" => PhantomKind::Texture,
        "edges" => PhantomKind::Edges,
        other => {
            return Err(cfg.error_at(
                "scene",
                "phantom",
                format!("unknown phantom '{other}' (checker, bars, ramp, texture, edges)"),
            ))
        }
    };
    let seed = match seed_override {
        Some(s) => s,
        None => cfg.u64_or("scene", "seed", 0)?,
    };

    // Per-band gains: a uniform base plus any number of band{k} overrides.
    let uniform = cfg.f64_or("gains", "uniform", 1.0)?;
    let mut band_gains = vec![uniform; n_bands];
    for (suffix, value, line) in cfg.prefixed("gains", "band") {
        let at = |message: String| Error::Parse {
            path: cfg.path().to_path_buf(),
            line,
            message,
        };
        let k: usize = suffix
            .parse()
            .map_err(|_| at(format!("'band{suffix}' is not a band index")))?;
        if k >= n_bands {
            return Err(at(format!("band{k} is out of range for {n_bands} bands")));
        }
        band_gains[k] = value
            .parse()
            .map_err(|_| at(format!("'{value}' is not a valid number")))?;
    }

    let mut table_path = None;
    let keystone = match cfg.str_opt("keystone", "model").unwrap_or("linear") {
        "zero" => KeystoneSpec::Zero,
        "linear" => {
            let max_dx = cfg.f64_opt("keystone", "max_dx")?;
            let amplitudes = cfg.f64_list_opt("keystone", "amplitudes")?;
            match (max_dx, amplitudes) {
                (Some(_), Some(_)) => {
                    return Err(cfg.error_at(
                        "keystone",
                        "max_dx",
                        "give either max_dx or explicit amplitudes, not both".into(),
                    ))
                }
                (Some(dx), None) => KeystoneSpec::linear_spread(n_bands, dx),
                (None, Some(amplitudes)) => {
                    let line_offsets = cfg
                        .f64_list_opt("keystone", "line_offsets")?
                        .unwrap_or_else(|| vec![0.0; n_bands]);
                    let reference_band =
                        cfg.usize_or("keystone", "reference_band", n_bands / 2)?;
                    KeystoneSpec::Linear { amplitudes, line_offsets, reference_band }
                }
                (None, None) => KeystoneSpec::linear_spread(n_bands, 0.3),
            }
        }
        "table" => {
            let rel = cfg.require("keystone", "path")?;
            let path = resolve(cfg.path(), rel);
            table_path = Some(rel.to_string());
            let lr_cols = hr_cols / scale.max(1);
            KeystoneSpec::FromTable(load_keystone_table(&path, n_bands, lr_cols)?)
        }
        other => {
            return Err(cfg.error_at(
                "keystone",
                "model",
                format!("unknown keystone model '{other}' (zero, linear, table)"),
            ))
        }
    };

    let psf = match cfg.str_opt("psf", "model").unwrap_or("rect") {
        "identity" => PsfSpec::Uniform(PsfRecipe::Identity),
        "gaussian" => {
            let sigma = match cfg.f64_opt("psf", "sigma")? {
                Some(s) => s,
                None => {
                    return Err(Error::invalid("psf", "gaussian psf needs a sigma key"));
                }
            };
            let radius = cfg.usize_or("psf", "radius", (3.0 * sigma).ceil().max(1.0) as usize)?;
            PsfSpec::Uniform(PsfRecipe::Gaussian { sigma, radius })
        }
        "rect" => {
            let support = cfg.usize_or("psf", "support", scale.max(1))?;
            PsfSpec::Uniform(PsfRecipe::Rect { support })
        }
        other => {
            return Err(cfg.error_at(
                "psf",
                "model",
                format!("unknown psf model '{other}' (identity, gaussian, rect)"),
            ))
        }
    };

    let noise = match (cfg.f64_opt("noise", "sigma")?, cfg.f64_opt("noise", "snr_db")?) {
        (Some(_), Some(_)) => {
            return Err(cfg.error_at(
                "noise",
                "sigma",
                "give either sigma or snr_db, not both".into(),
            ))
        }
        (Some(sigma), None) => NoiseSetting::Sigma(sigma),
        (None, Some(db)) => NoiseSetting::SnrDb(db),
        (None, None) => NoiseSetting::Sigma(0.0),
    };

    let spec = SceneSpec {
        hr_rows,
        hr_cols,
        scale,
        n_bands,
        phantom,
        band_gains,
        keystone,
        psf,
        noise: NoiseSpec::none(),
        seed,
    };
    Ok(ParsedScene { spec, noise, table_path })
}

fn resolve(config_path: &Path, rel: &str) -> std::path::PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Realize the noise sigma (running the generator dry if an SNR target was
/// given) and produce the final spec. Returns the spec plus the SNR target
/// for the manifest, if one was set.
pub fn realize_noise(parsed: &ParsedScene) -> Result<(SceneSpec, Option<f64>)> {
    let mut spec = parsed.spec.clone();
    match parsed.noise {
        NoiseSetting::Sigma(sigma) => {
            spec.noise = NoiseSpec::gaussian(sigma)?;
            Ok((spec, None))
        }
        NoiseSetting::SnrDb(db) => {
            let dry = generate(&spec)?;
            let sigma = sigma_for_snr(dry.noiseless.bands(), db)?;
            spec.noise = NoiseSpec::gaussian(sigma)?;
            Ok((spec, Some(db)))
        }
    }
}

// ---------------------------------------------------------------------------
// Manifest echo
// ---------------------------------------------------------------------------

fn phantom_name(kind: PhantomKind) -> &'static str {
    match kind {
        PhantomKind::Checker => "checker",
        PhantomKind::Bars => "bars",
        PhantomKind::Ramp => "ramp",
        PhantomKind::Texture => "texture",
        PhantomKind::Edges => "edges",
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Record every effective scene parameter.
pub fn describe_scene(
    m: &mut Manifest,
    spec: &SceneSpec,
    snr_db: Option<f64>,
    table_path: Option<&str>,
) {
    m.set("scene.hr_rows", spec.hr_rows);
    m.set("scene.hr_cols", spec.hr_cols);
    m.set("scene.scale", spec.scale);
    m.set("scene.bands", spec.n_bands);
    m.set("scene.phantom", phantom_name(spec.phantom));
    m.set("scene.seed", spec.seed);
    m.set("gains.per_band", join(&spec.band_gains));
    match &spec.keystone {
        KeystoneSpec::Zero => m.set("keystone.model", "zero"),
        KeystoneSpec::Linear { amplitudes, line_offsets, reference_band } => {
            m.set("keystone.model", "linear");
            m.set("keystone.amplitudes", join(amplitudes));
            m.set("keystone.line_offsets", join(line_offsets));
            m.set("keystone.reference_band", reference_band);
        }
        KeystoneSpec::FromTable(model) => {
            m.set("keystone.model", "table");
            m.set("keystone.reference_band", model.reference_band());
            if let Some(path) = table_path {
                m.set("keystone.path", path);
            }
        }
    }
    match &spec.psf {
        PsfSpec::Uniform(PsfRecipe::Identity) => m.set("psf.model", "identity"),
        PsfSpec::Uniform(PsfRecipe::Gaussian { sigma, radius }) => {
            m.set("psf.model", "gaussian");
            m.set("psf.sigma", sigma);
            m.set("psf.radius", radius);
        }
        PsfSpec::Uniform(PsfRecipe::Rect { support }) => {
            m.set("psf.model", "rect");
            m.set("psf.support", support);
        }
        PsfSpec::PerBand(_) => m.set("psf.model", "per-band"),
    }
    m.set("noise.sigma", spec.noise.sigma);
    if let Some(db) = snr_db {
        m.set("noise.snr_db", db);
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

pub fn run(
    config_path: &Path,
    output_dir: &Path,
    seed_override: Option<u64>,
) -> std::result::Result<(), StageError> {
    let cfg = Config::load(config_path).stage("config")?;
    let parsed = parse_scene(&cfg, seed_override).stage("config")?;
    let (spec, snr_db) = realize_noise(&parsed).stage("generate")?;
    let scene = generate(&spec).stage("generate")?;

    fs::create_dir_all(output_dir)
        .map_err(|source| Error::Io { path: output_dir.to_path_buf(), source })
        .stage("write")?;
    save_cube(&scene.cube, &output_dir.join("cube.hdr")).stage("write")?;
    let truth = HyperCube::new(vec![scene.truth.clone()]).stage("write")?;
    save_cube(&truth, &output_dir.join("truth.hdr")).stage("write")?;
    save_keystone_table(&scene.keystone, &output_dir.join("keystone.csv")).stage("write")?;
    let coeffs = HyperCube::new(scene.coeffs.bands().to_vec()).stage("write")?;
    save_cube(&coeffs, &output_dir.join("coeffs.hdr")).stage("write")?;

    let mut manifest = Manifest::new("synth");
    describe_scene(&mut manifest, &spec, snr_db, parsed.table_path.as_deref());
    manifest.write(&output_dir.join("manifest.txt")).stage("write")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
