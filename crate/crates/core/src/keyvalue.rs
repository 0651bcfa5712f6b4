//! Flat `key = value` config format shared by stage-schedule files and CLI
//! config files.
//!
//! One assignment per line, `#` starts a comment, blank lines are skipped.
//! Keys must be unique; a repeated key is an error rather than a silent
//! override.

use std::path::Path;

use crate::error::{Error, Result};

/// Parses the format into insertion-ordered pairs.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::Parse {
                path: None,
                message: format!("line {}: expected key = value, got {line:?}", lineno + 1),
            });
        };
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                path: None,
                message: format!("line {}: empty key", lineno + 1),
            });
        }
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(Error::Parse {
                path: None,
                message: format!("line {}: duplicate key {key:?}", lineno + 1),
            });
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

/// File wrapper around [`parse_key_values`] that tags errors with the path.
pub fn load_key_values(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_key_values(&text).map_err(|e| e.with_path(path))
}
