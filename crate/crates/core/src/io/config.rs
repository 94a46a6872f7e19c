//! Flat `key = value` text with `[section]` headers.
//!
//! `#` and `;` start comments. Keys outside any section live in the
//! section named `""`. Duplicate keys within a section are an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SnnError};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    value: String,
    line: usize,
}

fn config_err(line: usize, message: impl Into<String>) -> SnnError {
    SnnError::Config {
        line,
        message: message.into(),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line_no, format!("unterminated section header {line:?}")))?
                    .trim();
                if name.is_empty() {
                    return Err(config_err(line_no, "empty section name"));
                }
                section = name.to_ascii_lowercase();
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(line_no, format!("expected key = value, got {line:?}")))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(config_err(line_no, "empty key"));
            }
            let entries = cfg.sections.entry(section.clone()).or_default();
            if entries.contains_key(&key) {
                return Err(config_err(line_no, format!("duplicate key {key:?} in [{section}]")));
            }
            entries.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line: line_no,
                },
            );
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SnnError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl ToString) {
        self.sections.entry(section.to_ascii_lowercase()).or_default().insert(
            key.to_ascii_lowercase(),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|e| e.value.as_str())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    /// Parse the value at `section.key`, or `default` if absent.
    pub fn parse_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.sections.get(section).and_then(|s| s.get(key)) {
            None => Ok(default),
            Some(e) => e
                .value
                .parse()
                .map_err(|err| config_err(e.line, format!("[{section}] {key}: {err}"))),
        }
    }

    /// Comma-separated list; `a-b` expands to the inclusive integer range when
    /// `T` parses from integers.
    pub fn list_or<T: FromStr>(&self, section: &str, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.sections.get(section).and_then(|s| s.get(key)) else {
            return Ok(default);
        };
        let mut out = Vec::new();
        for item in e.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some((a, b)) = range_bounds(item) {
                for v in a..=b {
                    out.push(
                        v.to_string()
                            .parse()
                            .map_err(|err| config_err(e.line, format!("[{section}] {key}: {err}")))?,
                    );
                }
            } else {
                out.push(
                    item.parse()
                        .map_err(|err| config_err(e.line, format!("[{section}] {key}: {item:?}: {err}")))?,
                );
            }
        }
        Ok(out)
    }

    /// Keys that no caller asked about, as `section.key` strings.
    pub fn unknown_keys(&self, known: &[(&str, &[&str])]) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        for (section, entries) in &self.sections {
            let allowed = known.iter().find(|(s, _)| s == section).map(|(_, k)| *k);
            for (key, e) in entries {
                if !allowed.is_some_and(|k| k.contains(&key.as_str())) {
                    out.push((e.line, format!("[{section}] {key}")));
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (section, entries) in &self.sections {
            if !section.is_empty() {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
            }
            for (key, e) in entries {
                let _ = writeln!(out, "{key} = {}", e.value);
            }
        }
        out
    }

    /// Section contents without line numbers, for comparisons.
    pub fn values(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.sections
            .iter()
            .map(|(s, e)| (s.clone(), e.iter().map(|(k, v)| (k.clone(), v.value.clone())).collect()))
            .collect()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn range_bounds(item: &str) -> Option<(i64, i64)> {
    let (a, b) = item.split_once('-')?;
    let a: i64 = a.trim().parse().ok()?;
    let b: i64 = b.trim().parse().ok()?;
    (a <= b).then_some((a, b))
}
