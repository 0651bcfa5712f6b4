//! Config-file merging. Keys are the long flag names of the invoked
//! command; explicit flags win, config values fill the gaps, and built-in
//! defaults apply last. Unrecognized keys are rejected so a typo cannot
//! silently fall through to a default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::failure::Failure;

pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let pairs = vistile_core::keyvalue::load_key_values(path)
                .map_err(|e| Failure::usage(format!("config: {e}")))?;
            for (key, value) in pairs {
                map.insert(key, value);
            }
        }
        Ok(Self { map })
    }

    /// Removes and parses a config value; `None` when the key is absent.
    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.map.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                Failure::usage(format!("config key {key}: invalid value {raw:?}: {e}"))
            }),
        }
    }

    /// Boolean config values must be exactly `true` or `false`.
    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>, Failure> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(raw) => match raw.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(Failure::usage(format!(
                    "config key {key}: expected true or false, got {raw:?}"
                ))),
            },
        }
    }

    /// Fails on any key the invoked command did not consume.
    pub fn finish(self) -> Result<(), Failure> {
        match self.map.into_keys().next() {
            None => Ok(()),
            Some(key) => Err(Failure::usage(format!("config: unknown key {key:?}"))),
        }
    }
}

/// `flag.or(config).unwrap_or(default)` in one place, for readability at
/// the call sites.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// A value that must come from the flag or the config file.
pub fn require<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T, Failure> {
    flag.or(config)
        .ok_or_else(|| Failure::usage(format!("missing required --{name} (flag or config)")))
}

#[cfg(test)]
impl Settings {
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self {
            map: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}
