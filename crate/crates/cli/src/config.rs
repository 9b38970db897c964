//! JSON config files whose keys mirror the command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exit code 1.
    Usage(String),
    /// Failure while doing the work: exit code 2.
    Runtime(slog_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<slog_core::Error> for CliError {
    fn from(e: slog_core::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Flag values loaded from `--config`. Keys may be written `kebab-case` or
/// `snake_case`; keys no subcommand knows are ignored with a warning.
#[derive(Debug, Default)]
pub struct ConfigFile {
    pub path: Option<PathBuf>,
    values: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let parsed: Value =
            serde_json::from_str(&text).map_err(|e| usage(format!("config {} is not JSON: {e}", path.display())))?;
        let Value::Object(raw) = parsed else {
            return Err(usage(format!("config {} must hold a JSON object", path.display())));
        };
        let values = raw.into_iter().map(|(k, v)| (k.replace('_', "-"), v)).collect();
        Ok(Self {
            path: Some(path.to_path_buf()),
            values,
        })
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        match self.values.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| usage(format!("config key `{key}`: {e}"))),
        }
    }

    /// Overlay file values on `args` wherever the flag was not given on the
    /// command line.
    pub fn apply<T: Serialize + DeserializeOwned>(&self, args: T, matches: &ArgMatches, globals: &[&str]) -> CliResult<T> {
        let Value::Object(mut fields) = serde_json::to_value(&args).expect("argument structs serialize") else {
            unreachable!("argument structs serialize to objects");
        };
        for (key, value) in &self.values {
            if globals.contains(&key.as_str()) {
                continue;
            }
            if !fields.contains_key(key) {
                log::warn!("config key `{key}` is not used by this subcommand");
                continue;
            }
            let id = key.replace('-', "_");
            if matches.value_source(&id) == Some(ValueSource::CommandLine) {
                continue;
            }
            fields.insert(key.clone(), value.clone());
        }
        serde_json::from_value(Value::Object(fields)).map_err(|e| usage(format!("config file: {e}")))
    }
}

pub fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("the following required argument was not provided: --{flag}")))
}
