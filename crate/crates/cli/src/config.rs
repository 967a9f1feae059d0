//! Flat `key = value` configuration files. Keys are flag names without the
//! leading dashes; `#` starts a comment.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::error::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "n", "p", "s", "r", "rho", "kappa", "kappa-s", "epsilon", "c-kappa", "c", "net-eps", "probes", "trials", "seed",
    "out", "format", "oracle", "matrix", "v", "v-random", "max-attempts", "brute-force-limit", "r-grid",
    "binomials", "eps-grid",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::format(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::format(format!("line {}: expected 'key = value'", i + 1)))?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::format(format!("line {}: unknown key '{key}'", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolves settings with precedence flag > config file > default, and
/// remembers every resolved value for echoing into output artifacts.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    effective: BTreeMap<String, Value>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Self { file, effective: BTreeMap::new() }
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.file.raw(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::format(format!("config value '{raw}' for '{key}' does not parse"))),
        }
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Into<Value> + Clone,
    {
        let value = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.effective.insert(key.to_string(), value.clone().into());
        Ok(value)
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Into<Value> + Clone,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        self.effective
            .insert(key.to_string(), value.clone().map_or(Value::Null, Into::into));
        Ok(value)
    }

    /// Boolean switch: set by the flag, or by `key = true` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let value = flag || self.file_value::<bool>(key)?.unwrap_or(false);
        self.effective.insert(key.to_string(), value.into());
        Ok(value)
    }

    /// Comma-separated list.
    pub fn list<T>(&mut self, key: &str, flag: Option<Vec<T>>, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Into<Value> + Clone,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.raw(key) {
                Some(raw) => raw
                    .split(',')
                    .map(|x| x.trim().parse())
                    .collect::<Result<Vec<T>, _>>()
                    .map_err(|_| CliError::format(format!("config list '{raw}' for '{key}' does not parse")))?,
                None => default.to_vec(),
            },
        };
        self.effective
            .insert(key.to_string(), Value::Array(value.iter().cloned().map(Into::into).collect()));
        Ok(value)
    }

    pub fn record(&mut self, key: &str, value: impl Into<Value>) {
        self.effective.insert(key.to_string(), value.into());
    }

    pub fn effective(&self) -> &BTreeMap<String, Value> {
        &self.effective
    }
}
