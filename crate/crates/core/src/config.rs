//! Flat `key = value` configuration text.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys
//! are dotted identifiers (`joint.hip_left.kp`). Values are parsed on access
//! so that errors can name the offending key and line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}` (line {line}): cannot parse {value:?} as {expected}")]
    BadValue {
        key: String,
        line: usize,
        value: String,
        expected: &'static str,
    },
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    used: std::cell::Cell<bool>,
}

/// Parsed key-value document. Tracks which keys were read so that typos
/// surface as [`ConfigError::UnknownKey`] via [`KvConfig::finish`].
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, Entry>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax { line, text: raw.to_string() })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax { line, text: raw.to_string() });
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
                used: std::cell::Cell::new(false),
            };
            if entries.insert(key.to_string(), entry).is_some() {
                return Err(ConfigError::Duplicate { line, key: key.to_string() });
            }
        }
        Ok(KvConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Entries under `prefix`, with the prefix stripped. The extracted keys
    /// count as used here.
    pub fn take_prefix(&self, prefix: &str) -> KvConfig {
        let entries = self
            .entries
            .iter()
            .filter_map(|(k, e)| {
                let rest = k.strip_prefix(prefix)?;
                e.used.set(true);
                Some((
                    rest.to_string(),
                    Entry {
                        used: std::cell::Cell::new(false),
                        ..e.clone()
                    },
                ))
            })
            .collect();
        KvConfig { entries }
    }

    /// Entries of `other` replace entries with the same key.
    pub fn overlay(&mut self, other: KvConfig) {
        self.entries.extend(other.entries);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| {
            e.used.set(true);
            e.value.as_str()
        })
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        let Some(entry) = self.entries.get(key) else {
            return Ok(None);
        };
        entry.used.set(true);
        entry.value.parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            line: entry.line,
            value: entry.value.clone(),
            expected,
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parsed::<f64>(key, "a number")?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.parsed::<usize>(key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.parsed::<u64>(key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        Ok(self.parsed::<bool>(key, "true or false")?.unwrap_or(default))
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    /// Comma-separated list of numbers.
    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let Some(entry) = self.entries.get(key) else {
            return Ok(default.to_vec());
        };
        entry.used.set(true);
        if entry.value.is_empty() {
            return Ok(Vec::new());
        }
        entry
            .value
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                line: entry.line,
                value: entry.value.clone(),
                expected: "a comma-separated list of numbers",
            })
    }

    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, ConfigError> {
        let Some(entry) = self.entries.get(key) else {
            return Ok(default.to_vec());
        };
        entry.used.set(true);
        if entry.value.is_empty() {
            return Ok(Vec::new());
        }
        entry
            .value
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                line: entry.line,
                value: entry.value.clone(),
                expected: "a comma-separated list of integers",
            })
    }

    /// Fails on the first key that was never read.
    pub fn finish(&self) -> Result<(), ConfigError> {
        match self.entries.iter().find(|(_, e)| !e.used.get()) {
            Some((key, e)) => Err(ConfigError::UnknownKey {
                key: key.clone(),
                line: e.line,
            }),
            None => Ok(()),
        }
    }
}

/// Builder for canonical config text. Floats are written with the shortest
/// representation that round-trips, so `parse(write(x)) == x` bit for bit.
#[derive(Debug, Default)]
pub struct KvWriter {
    out: String,
}

impl KvWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        let _ = writeln!(self.out, "# {text}");
        self
    }

    pub fn f64(&mut self, key: &str, v: f64) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {v:?}");
        self
    }

    pub fn int(&mut self, key: &str, v: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {v}");
        self
    }

    pub fn bool(&mut self, key: &str, v: bool) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {v}");
        self
    }

    pub fn str(&mut self, key: &str, v: &str) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {v}");
        self
    }

    pub fn f64_list(&mut self, key: &str, v: &[f64]) -> &mut Self {
        let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(self.out, "{key} = {}", items.join(", "));
        self
    }

    pub fn usize_list(&mut self, key: &str, v: &[usize]) -> &mut Self {
        let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(self.out, "{key} = {}", items.join(", "));
        self
    }

    pub fn finish(&mut self) -> String {
        std::mem::take(&mut self.out)
    }
}
