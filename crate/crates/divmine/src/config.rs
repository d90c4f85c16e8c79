//! Plain-text run configuration: `[section]` headers over `key = value`
//! lines, `#` comments. Typed getters report the offending section and key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RawConfig::default();
        let mut current: Option<String> = None;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(origin, lineno + 1, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::parse(origin, lineno + 1, "empty section name"));
                }
                cfg.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(
                    origin,
                    lineno + 1,
                    format!("expected 'key = value', got '{line}'"),
                ));
            };
            let section = current
                .as_ref()
                .ok_or_else(|| Error::parse(origin, lineno + 1, "key before any [section]"))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::parse(origin, lineno + 1, "empty key"));
            }
            let prev = cfg
                .sections
                .get_mut(section)
                .expect("section exists")
                .insert(key.clone(), value.trim().to_string());
            if prev.is_some() {
                return Err(Error::parse(
                    origin,
                    lineno + 1,
                    format!("duplicate key '{key}' in [{section}]"),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, path)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| Error::Config(format!("[{section}] {key}: missing required value")))
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    fn parse_with<T: FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("[{section}] {key}: '{v}' is not {what}"))
            }),
        }
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.parse_with(section, key, "a number")
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.parse_with(section, key, "a non-negative integer")
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.parse_with(section, key, "a non-negative integer")
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.get(section, key) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(v) => Err(Error::Config(format!(
                "[{section}] {key}: '{v}' is not true/false"
            ))),
        }
    }

    /// Comma-separated list; whitespace around items is ignored.
    pub fn get_list(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.get(section, key).map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        })
    }

    pub fn get_usize_list(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get_list(section, key) {
            None => Ok(None),
            Some(items) => items
                .iter()
                .map(|s| {
                    s.parse::<usize>().map_err(|_| {
                        Error::Config(format!(
                            "[{section}] {key}: '{s}' is not a non-negative integer"
                        ))
                    })
                })
                .collect::<Result<Vec<usize>>>()
                .map(Some),
        }
    }

    /// Enum-valued keys routed through the type's FromStr.
    pub fn get_enum<T>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T: FromStr<Err = Error>,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("[{section}] {key}: {e}"))),
        }
    }

    /// Sections and keys in sorted order, one assignment per line.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for (section, entries) in &self.sections {
            for (key, value) in entries {
                out.push_str(section);
                out.push('.');
                out.push_str(key);
                out.push('=');
                out.push_str(value);
                out.push('\n');
            }
        }
        out
    }

    /// 16 hex digit content hash; invariant to section order, comments, and
    /// whitespace in the source file.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.canonical_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// A parsed config plus the master seed (file value, overridable).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub master_seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let raw = RawConfig::load(path)?;
        Self::from_raw(raw, seed_override)
    }

    pub fn from_raw(raw: RawConfig, seed_override: Option<u64>) -> Result<Self> {
        let master_seed = match seed_override {
            Some(s) => s,
            None => raw.get_u64("run", "seed")?.unwrap_or(0),
        };
        Ok(RunConfig { raw, master_seed })
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw.get("paths", "out_dir").unwrap_or("out"))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.raw.require("paths", key)?))
    }

    /// Resolvability check for the input paths a subcommand reads.
    pub fn check_input_paths(&self, keys: &[&str]) -> Result<()> {
        for key in keys {
            let p = self.path(key)?;
            if !p.exists() {
                return Err(Error::Config(format!(
                    "[paths] {key}: '{}' does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}
