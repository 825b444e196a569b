//! Flat key-value run configuration with flag override.
//!
//! A config file holds `key = value` lines (`#` comments and blank lines
//! ignored). Flags take precedence over file values, which take precedence
//! over built-in defaults. Every resolved key is recorded and echoed into
//! each artifact so a run is reproducible from its own output.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub struct Resolver {
    file_values: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config_path: Option<&Path>) -> Result<Self, CliError> {
        let mut file_values = BTreeMap::new();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Data(format!("cannot read config file {}: {e}", path.display()))
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::Usage(format!(
                        "config line {}: expected `key = value`, got {line:?}",
                        lineno + 1
                    )));
                };
                file_values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Resolver { file_values, resolved: BTreeMap::new() })
    }

    /// Resolve one knob: flag value, else config-file value, else default.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file_values.get(key) {
                Some(raw) => raw.parse::<T>().map_err(|e| {
                    CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {e}"))
                })?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Resolve an optional knob with no default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file_values.get(key) {
                Some(raw) => Some(raw.parse::<T>().map_err(|e| {
                    CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {e}"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Record a value that is not user-tunable (e.g. the command name).
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    /// `# key = value` preamble embedded at the top of CSV artifacts.
    pub fn preamble(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out
    }
}
