//! Band-sequential raster files with an ENVI-style text header.
//!
//! A cube is stored as two files sharing a stem: `name.hdr` (text header) and
//! `name.bsq` (raw binary). The supported subset is deliberately narrow so
//! other tools can read the output without a full ENVI implementation:
//!
//! * `data type = 4` (32-bit IEEE float), `byte order = 0` (little endian),
//!   `interleave = bsq`, `header offset = 0`.
//! * Optional `wavelength = {...}` list (nanometres, one entry per band).
//! * Optional `data gain values` / `data offset values` lists: when present,
//!   samples are converted at load via `value = gain * raw + offset` per band
//!   (raw digital numbers to radiance). Saving always writes plain values.
//!
//! Values already representable in float32 round-trip bit-exactly; the
//! in-memory grids are `f64`, so arbitrary doubles are quantized once on save.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{BandMeta, HyperCube, ImageGrid};

/// Parsed header fields, before any binary data is touched.
#[derive(Debug, Clone, PartialEq)]
pub struct EnviHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub data_type: u32,
    pub byte_order: u32,
    pub header_offset: u64,
    pub interleave: String,
    pub wavelengths: Option<Vec<f64>>,
    pub gains: Option<Vec<f64>>,
    pub offsets: Option<Vec<f64>>,
}

/// Parse header text. Exposed separately from [`load_cube`] so header
/// declarations can be validated without reading the payload.
pub fn parse_envi_header(text: &str, path: &Path) -> Result<EnviHeader> {
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, first)) if first.trim() == "ENVI" => {}
        Some((_, first)) => {
            return Err(Error::parse(path, 1, format!("expected `ENVI` magic line, got `{}`", first.trim())))
        }
        None => return Err(Error::parse(path, 1, "empty header file")),
    }

    let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
    while let Some((idx, line)) = lines.next() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line_no, format!("expected `key = value`, got `{trimmed}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let mut value = value.trim().to_string();
        // Brace-delimited lists may span several lines.
        if value.starts_with('{') && !value.contains('}') {
            for (idx2, cont) in lines.by_ref() {
                value.push(' ');
                value.push_str(cont.trim());
                if cont.contains('}') {
                    break;
                }
                let _ = idx2;
            }
            if !value.contains('}') {
                return Err(Error::parse(path, line_no, format!("unterminated `{{` list for `{key}`")));
            }
        }
        fields.insert(key, (line_no, value));
    }

    let get_usize = |key: &str| -> Result<usize> {
        let (line_no, raw) = fields
            .get(key)
            .ok_or_else(|| Error::parse(path, 1, format!("missing required field `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::parse(path, *line_no, format!("bad value for `{key}`: `{raw}`")))
    };

    let samples = get_usize("samples")?;
    let lines_count = get_usize("lines")?;
    let bands = get_usize("bands")?;
    let data_type = get_usize("data type")? as u32;
    let byte_order = fields.get("byte order").map(|(l, v)| {
        v.parse::<u32>().map_err(|_| Error::parse(path, *l, format!("bad value for `byte order`: `{v}`")))
    }).transpose()?.unwrap_or(0);
    let header_offset = fields.get("header offset").map(|(l, v)| {
        v.parse::<u64>().map_err(|_| Error::parse(path, *l, format!("bad value for `header offset`: `{v}`")))
    }).transpose()?.unwrap_or(0);
    let interleave = fields
        .get("interleave")
        .map(|(_, v)| v.to_ascii_lowercase())
        .unwrap_or_else(|| "bsq".to_string());

    if samples == 0 || lines_count == 0 || bands == 0 {
        return Err(Error::parse(path, 1, "samples, lines, and bands must all be positive"));
    }

    let parse_list = |key: &str| -> Result<Option<Vec<f64>>> {
        match fields.get(key) {
            None => Ok(None),
            Some((line_no, raw)) => {
                let inner = raw
                    .trim()
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| Error::parse(path, *line_no, format!("`{key}` must be a {{...}} list")))?;
                let values: std::result::Result<Vec<f64>, _> =
                    inner.split(',').map(|v| v.trim().parse::<f64>()).collect();
                let values = values
                    .map_err(|_| Error::parse(path, *line_no, format!("bad float in `{key}` list")))?;
                if values.len() != bands {
                    return Err(Error::parse(
                        path,
                        *line_no,
                        format!("`{key}` lists {} values for {bands} bands", values.len()),
                    ));
                }
                Ok(Some(values))
            }
        }
    };

    Ok(EnviHeader {
        samples,
        lines: lines_count,
        bands,
        data_type,
        byte_order,
        header_offset,
        interleave,
        wavelengths: parse_list("wavelength")?,
        gains: parse_list("data gain values")?,
        offsets: parse_list("data offset values")?,
    })
}

fn binary_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bsq")
}

/// Locate the payload next to the header: `.bsq`, then `.img`, then the bare stem.
fn find_binary(header_path: &Path) -> Result<PathBuf> {
    for ext in ["bsq", "img", "raw"] {
        let candidate = header_path.with_extension(ext);
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    let bare = header_path.with_extension("");
    if bare.is_file() {
        return Ok(bare);
    }
    Err(Error::io(
        binary_path(header_path),
        std::io::Error::new(std::io::ErrorKind::NotFound, "no .bsq/.img/.raw payload next to header"),
    ))
}

/// Load a cube given its header path.
pub fn load_cube(header_path: &Path) -> Result<HyperCube> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header = parse_envi_header(&text, header_path)?;

    if header.data_type != 4 {
        return Err(Error::UnsupportedFormat(format!(
            "data type {} (only 4, float32, is supported)",
            header.data_type
        )));
    }
    if header.byte_order != 0 {
        return Err(Error::UnsupportedFormat(format!(
            "byte order {} (only 0, little endian, is supported)",
            header.byte_order
        )));
    }
    if header.interleave != "bsq" {
        return Err(Error::UnsupportedFormat(format!(
            "interleave `{}` (only bsq is supported)",
            header.interleave
        )));
    }

    let bin_path = find_binary(header_path)?;
    let payload = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;

    let n_samples = header.samples * header.lines * header.bands;
    let expected_bytes = header.header_offset + n_samples as u64 * 4;
    if payload.len() as u64 != expected_bytes {
        return Err(Error::SizeMismatch {
            path: bin_path,
            expected_bytes,
            actual_bytes: payload.len() as u64,
        });
    }

    let body = &payload[header.header_offset as usize..];
    let plane = header.samples * header.lines;
    let mut bands = Vec::with_capacity(header.bands);
    for k in 0..header.bands {
        let gain = header.gains.as_ref().map(|g| g[k]).unwrap_or(1.0);
        let offset = header.offsets.as_ref().map(|o| o[k]).unwrap_or(0.0);
        let mut data = Vec::with_capacity(plane);
        for i in 0..plane {
            let at = (k * plane + i) * 4;
            let raw = f32::from_le_bytes([body[at], body[at + 1], body[at + 2], body[at + 3]]);
            data.push(gain * raw as f64 + offset);
        }
        bands.push(ImageGrid::from_vec(header.lines, header.samples, data)?);
    }

    let meta = (0..header.bands)
        .map(|index| BandMeta {
            index,
            wavelength_nm: header.wavelengths.as_ref().map(|w| w[index]),
        })
        .collect();
    HyperCube::with_meta(bands, meta)
}

/// Save a cube as `header_path` plus a sibling `.bsq` payload.
pub fn save_cube(cube: &HyperCube, header_path: &Path) -> Result<()> {
    let mut header = String::from("ENVI\n");
    header.push_str("description = {keystone super-resolution raster}\n");
    header.push_str(&format!("samples = {}\n", cube.cols()));
    header.push_str(&format!("lines = {}\n", cube.rows()));
    header.push_str(&format!("bands = {}\n", cube.n_bands()));
    header.push_str("header offset = 0\n");
    header.push_str("file type = ENVI Standard\n");
    header.push_str("data type = 4\n");
    header.push_str("interleave = bsq\n");
    header.push_str("byte order = 0\n");
    if cube.meta().iter().all(|m| m.wavelength_nm.is_some()) {
        let list: Vec<String> = cube
            .meta()
            .iter()
            .map(|m| format!("{}", m.wavelength_nm.unwrap()))
            .collect();
        header.push_str(&format!("wavelength = {{{}}}\n", list.join(", ")));
    }

    let mut payload = Vec::with_capacity(cube.n_bands() * cube.rows() * cube.cols() * 4);
    for band in cube.bands() {
        for &v in band.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }

    fs::write(header_path, header).map_err(|e| Error::io(header_path, e))?;
    let bin = binary_path(header_path);
    fs::write(&bin, payload).map_err(|e| Error::io(&bin, e))
}
