//! Plain `key = value` configuration files with optional `[section]` blocks.
//!
//! Keys before the first section header live in the root section. Sections
//! listed as *line sections* (such as `[patterns]`) hold one raw value per
//! line instead of key/value pairs. `#` starts a comment line.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("config key `{key}`: {reason}")]
    Value { key: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueFile {
    /// section name ("" for root) -> key -> value
    pub values: BTreeMap<String, BTreeMap<String, String>>,
    /// line section name -> lines in file order
    pub lines: BTreeMap<String, Vec<String>>,
}

impl KeyValueFile {
    pub fn parse(input: &str, line_sections: &[&str]) -> Result<Self, ConfigError> {
        let mut file = KeyValueFile::default();
        let mut section = String::new();
        for (idx, raw) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if line_sections.contains(&section.as_str()) {
                    file.lines.entry(section.clone()).or_default();
                }
                continue;
            }
            if line_sections.contains(&section.as_str()) {
                // Patterns may legitimately contain `=`, so take the raw line.
                file.lines
                    .entry(section.clone())
                    .or_default()
                    .push(raw.trim().to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    reason: format!("expected `key = value`, found {line:?}"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    reason: "empty key".into(),
                });
            }
            file.values
                .entry(section.clone())
                .or_default()
                .insert(key.to_string(), value.trim().to_string());
        }
        Ok(file)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(section)?.get(key).map(String::as_str)
    }

    /// Parses `section.key` if present.
    pub fn parse_value<T>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| ConfigError::Value {
                key: qualified(section, key),
                reason: format!("{raw:?}: {e}"),
            }),
        }
    }

    pub fn section_lines(&self, section: &str) -> Option<&[String]> {
        self.lines.get(section).map(Vec::as_slice)
    }
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}
