//! `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Values from the file
//! are overridden by command-line flags, and every key a command reads is
//! recorded with its final value so the run can be echoed in full.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};

use crate::exit::{Coded, EXIT_CONFIG};

pub const RESOLVED_CONFIG_NAME: &str = "resolved_config.txt";

/// Every key any command understands. Anything else is a typo.
const KNOWN_KEYS: &[&str] = &[
    // synth
    "size",
    "n_train",
    "n_validation",
    "n_test",
    "band_fraction",
    "advection_speed_min",
    "advection_speed_max",
    "cell_density",
    "spectral_slope",
    "event_hours",
    "peak_min",
    "peak_max",
    "max_retries",
    "artifact_fraction",
    "artifact_level",
    "artifact_jitter",
    "artifact_min_side",
    "artifact_max_side",
    // train
    "mode",
    "scale",
    "alpha",
    "lambda_gp",
    "batch_size",
    "n_critic",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_epsilon",
    "epochs",
    "generator_channels",
    "generator_kernels",
    "upsample_mode",
    "leaky_slope",
    "critic_widths",
    // shared
    "seed",
    "split",
];

#[derive(Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

fn config_error(msg: String) -> anyhow::Error {
    anyhow::Error::new(Coded(EXIT_CONFIG)).context(msg)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                config_error(format!(
                    "config line {}: expected key = value, got '{raw}'",
                    i + 1
                ))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(config_error(format!(
                    "config line {}: unknown key '{k}'",
                    i + 1
                )));
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(config_error(format!(
                    "config line {}: duplicate key '{k}'",
                    i + 1
                )));
            }
        }
        Ok(Self {
            values,
            resolved: BTreeMap::new(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text)
            }
        }
    }

    /// Applies `key=value` overrides from the command line.
    pub fn set(&mut self, key: &str, value: impl Display) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(config_error(format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn set_opt(&mut self, key: &str, value: Option<impl Display>) -> Result<()> {
        match value {
            Some(v) => self.set(key, v),
            None => Ok(()),
        }
    }

    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| config_error(format!("override '{p}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Typed value of `key`, falling back to `default`; the result is recorded.
    pub fn get<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        let value = match self.values.get(key) {
            Some(raw) => raw.parse::<T>().map_err(|e| {
                config_error(format!("config key {key}: cannot parse '{raw}': {e}"))
            })?,
            None => default,
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Comma-separated list value.
    pub fn get_list(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        let joined = default
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let raw: String = self.get(key, joined)?;
        let list = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| config_error(format!("config key {key}: bad list '{raw}': {e}")))?;
        Ok(list)
    }

    /// Every key read so far with its final value, one `key = value` per line.
    pub fn resolved_text(&self) -> String {
        self.resolved
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RESOLVED_CONFIG_NAME);
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(&path, self.resolved_text())
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Shorthand for configuration errors raised outside the parser.
pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    config_error(msg.into())
}
