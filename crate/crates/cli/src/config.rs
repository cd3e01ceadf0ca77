//! Flat `[section] key=value` config files.
//!
//! The format is deliberately primitive so any language (or a shell one-liner)
//! can read and diff it: full-line `#` comments, `[section]` headers, and one
//! `key = value` pair per line. Every parse failure is reported with the file
//! path and 1-based line number, and every key is checked against the schema
//! of the subcommand that loads it, so a typo fails loudly instead of being
//! silently ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use keysr_core::error::{Error, Result};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// One parsed config file. Keys are addressed as (section, key); the line
/// number of each entry is kept so later validation can point at the source.
#[derive(Debug, Clone)]
pub struct Config {
    path: PathBuf,
    entries: BTreeMap<(String, String), (String, usize)>,
    /// Section name -> line of its first header.
    sections: BTreeMap<String, usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Config::parse(path, &text)
    }

    fn parse(path: &Path, text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        let mut sections = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message,
            };
            if let Some(inner) = line.strip_prefix('[') {
                let name = inner
                    .strip_suffix(']')
                    .ok_or_else(|| fail("section header is missing the closing ']'".into()))?
                    .trim();
                if name.is_empty() {
                    return Err(fail("section name is empty".into()));
                }
                sections.entry(name.to_string()).or_insert(line_no);
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail("expected 'key = value' or '[section]'".into()))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(fail("key is empty".into()));
            }
            let section = current
                .clone()
                .ok_or_else(|| fail(format!("key '{key}' appears before any [section] header")))?;
            let slot = (section.clone(), key.to_string());
            if let Some((_, first)) = entries.get(&slot) {
                return Err(fail(format!(
                    "duplicate key '{key}' in [{section}] (first set on line {first})"
                )));
            }
            entries.insert(slot, (value.to_string(), line_no));
        }
        Ok(Config { path: path.to_path_buf(), entries, sections })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    // -----------------------------------------------------------------------
    // Schema checks
    // -----------------------------------------------------------------------

    /// Reject sections outside `allowed`, pointing at the offending header.
    pub fn check_sections(&self, allowed: &[&str]) -> Result<()> {
        for (name, &line) in &self.sections {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::Parse {
                    path: self.path.clone(),
                    line,
                    message: format!(
                        "unknown section [{name}] (expected one of: {})",
                        allowed.join(", ")
                    ),
                });
            }
        }
        Ok(())
    }

    /// Reject keys in `section` outside `allowed`, pointing at the entry.
    /// A key prefix ending in `*` (for example `band*`) admits any key that
    /// starts with the prefix.
    pub fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<()> {
        for ((sec, key), &(_, line)) in &self.entries {
            if sec != section {
                continue;
            }
            let ok = allowed.iter().any(|pat| match pat.strip_suffix('*') {
                Some(prefix) => key.starts_with(prefix) && key.len() > prefix.len(),
                None => key == pat,
            });
            if !ok {
                return Err(Error::Parse {
                    path: self.path.clone(),
                    line,
                    message: format!(
                        "unknown key '{key}' in [{section}] (expected one of: {})",
                        allowed.join(", ")
                    ),
                });
            }
        }
        Ok(())
    }

    // -----------------------------------------------------------------------
    // Typed accessors
    // -----------------------------------------------------------------------

    pub fn str_opt(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|(value, _)| value.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.str_opt(section, key).ok_or_else(|| Error::InvalidParameter {
            name: "config",
            message: format!("{}: [{section}] {key} is required", self.path.display()),
        })
    }

    /// All keys of `section` that start with `prefix`, with the remainder of
    /// each key, its value, and its line, in file-independent sorted order.
    pub fn prefixed(&self, section: &str, prefix: &str) -> Vec<(String, &str, usize)> {
        self.entries
            .iter()
            .filter(|((sec, key), _)| sec == section && key.starts_with(prefix))
            .map(|((_, key), (value, line))| {
                (key[prefix.len()..].to_string(), value.as_str(), *line)
            })
            .collect()
    }

    fn parse_at<T: std::str::FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>> {
        let slot = (section.to_string(), key.to_string());
        match self.entries.get(&slot) {
            None => Ok(None),
            Some((value, line)) => value.parse::<T>().map(Some).map_err(|_| Error::Parse {
                path: self.path.clone(),
                line: *line,
                message: format!("key '{key}': '{value}' is not a valid {what}"),
            }),
        }
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.parse_at(section, key, "number")
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    pub fn u64_opt(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.parse_at(section, key, "unsigned integer")
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        Ok(self.u64_opt(section, key)?.unwrap_or(default))
    }

    pub fn usize_opt(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.parse_at(section, key, "unsigned integer")
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize_opt(section, key)?.unwrap_or(default))
    }

    pub fn usize_require(&self, section: &str, key: &str) -> Result<usize> {
        self.require(section, key)?;
        Ok(self.usize_opt(section, key)?.expect("checked by require"))
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        let slot = (section.to_string(), key.to_string());
        match self.entries.get(&slot) {
            None => Ok(default),
            Some((value, line)) => match value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(Error::Parse {
                    path: self.path.clone(),
                    line: *line,
                    message: format!("key '{key}': '{other}' is not a boolean (true/false)"),
                }),
            },
        }
    }

    /// Comma-separated list of numbers.
    pub fn f64_list_opt(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let slot = (section.to_string(), key.to_string());
        let Some((value, line)) = self.entries.get(&slot) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for part in value.split(',') {
            let part = part.trim();
            out.push(part.parse::<f64>().map_err(|_| Error::Parse {
                path: self.path.clone(),
                line: *line,
                message: format!("key '{key}': '{part}' is not a valid number"),
            })?);
        }
        Ok(Some(out))
    }

    /// Line number of an entry, for error messages that outlive the accessor.
    pub fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|&(_, line)| line)
    }

    /// Build a parse error pointing at an existing entry.
    pub fn error_at(&self, section: &str, key: &str, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line_of(section, key).unwrap_or(0),
            message,
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
