//! Run manifests: one sorted `key = value` line per effective parameter,
//! plus a SHA-256 digest of every input file. Reruns with identical inputs
//! and parameters produce byte-identical manifests, so a manifest diff is a
//! complete answer to "what changed between these two runs". Timestamps and
//! host details are deliberately absent for that reason.

use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use keysr_core::error::{Error, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(tool: &str) -> Manifest {
        let mut m = Manifest::default();
        m.set("tool", format!("keysr {} {}", tool, env!("CARGO_PKG_VERSION")));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Record an input file as its basename plus content digest. The basename
    /// (not the full path) keeps manifests comparable across working
    /// directories.
    pub fn input(&mut self, label: &str, path: &Path) -> Result<()> {
        let bytes =
            fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let digest = Sha256::digest(&bytes);
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.set(&format!("input.{label}.file"), name);
        self.set(&format!("input.{label}.sha256"), hex(&digest));
        Ok(())
    }

    /// Write all entries sorted by key.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut sorted = self.entries.clone();
        sorted.sort();
        let mut out = Vec::new();
        for (key, value) in &sorted {
            writeln!(out, "{key} = {value}").expect("writing to a Vec cannot fail");
        }
        fs::write(path, out).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
