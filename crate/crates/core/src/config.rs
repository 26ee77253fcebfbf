//! Flat key-value configuration files.
//!
//! A config file is a TOML document with top-level `key = value` pairs only;
//! sections are rejected, and so are keys the target struct does not know.
//! Missing keys take their defaults.
//!
//! ```toml
//! format_weight = 0.2
//! accuracy_weight = 1.0
//! fftqa_bleu_weight = 0.5
//! fftqa_rouge_weight = 0.5
//! format_schedule = [0.0, 0.2, 0.4, 0.7, 1.0]
//! eps_low = 0.2
//! eps_high = 0.28
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{0}` is a section; only flat keys are supported")]
    Section(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

/// Keys accepted for `T`, taken from its serialized default.
pub fn known_keys<T: Serialize + Default>() -> Vec<String> {
    match toml::Table::try_from(T::default()) {
        Ok(table) => table.keys().cloned().collect(),
        Err(_) => Vec::new(),
    }
}

pub fn parse_flat<T>(text: &str) -> Result<T, ConfigError>
where
    T: DeserializeOwned + Serialize + Default,
{
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let known = known_keys::<T>();
    for (key, value) in &table {
        if value.is_table() {
            return Err(ConfigError::Section(key.clone()));
        }
        if !known.iter().any(|k| k == key) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Invalid(e.message().to_string()))
}

pub fn load_flat<T>(path: &Path) -> Result<T, ConfigError>
where
    T: DeserializeOwned + Serialize + Default,
{
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_flat(&text)
}

pub fn to_flat_string<T: Serialize>(value: &T) -> Result<String, ConfigError> {
    toml::to_string(value).map_err(|e| ConfigError::Invalid(e.to_string()))
}
