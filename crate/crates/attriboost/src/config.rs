//! Run configuration: one TOML document with `[train]` and `[oracle]`
//! sections, overridden by `--set key=value` flags.

use std::path::Path;

use attriboost_core::{OracleConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{AppError, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub train: TrainConfig,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            train: TrainConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

/// A resolved configuration and whether its seed was drawn at random.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: RunConfig,
    pub seed_drawn: bool,
}

const SECTIONS: [&str; 2] = ["train", "oracle"];

fn defaults_doc() -> Value {
    serde_json::to_value(RunConfig::default()).expect("config serializes")
}

/// Finds the section holding `key`, accepting bare and `section.key` forms.
fn locate<'a>(defaults: &Value, key: &'a str) -> Result<(&'static str, &'a str)> {
    let key = key.trim();
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => {
            let s = SECTIONS
                .iter()
                .find(|x| **x == s)
                .ok_or_else(|| AppError::Config(format!("unknown config section `{s}` in `{key}`")))?;
            (Some(*s), f)
        }
        None => (None, key),
    };
    let field = if field == "T" { "rounds" } else { field };
    let hits: Vec<&'static str> = SECTIONS
        .iter()
        .copied()
        .filter(|s| section.is_none_or(|want| want == *s))
        .filter(|s| defaults[*s].get(field).is_some())
        .collect();
    match hits.as_slice() {
        [one] => Ok((one, field)),
        [] => Err(AppError::Config(format!("unknown config key `{key}`"))),
        _ => Err(AppError::Config(format!("config key `{key}` is ambiguous; qualify it with a section"))),
    }
}

/// Parses an override value as a TOML scalar, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|t| t.get("v").cloned())
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn toml_to_json(path: &Path, text: &str) -> Result<Value> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    serde_json::to_value(table).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

/// Builds the run configuration with precedence CLI > file > defaults.
///
/// `seed` is the dedicated `--seed` flag. When no seed is given anywhere a
/// random one is drawn; the caller must report it.
pub fn resolve(file: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Resolved> {
    let defaults = defaults_doc();
    let mut doc = Value::Object(Map::new());
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        doc = toml_to_json(path, &text)?;
        if let Some(v) = doc.get("schema_version") {
            if v.as_u64() != Some(u64::from(CONFIG_SCHEMA_VERSION)) {
                return Err(AppError::Config(format!(
                    "{}: schema_version {v} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                    path.display()
                )));
            }
        }
    }
    for s in SECTIONS {
        if doc.get(s).is_none() {
            doc[s] = Value::Object(Map::new());
        }
    }
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("override `{ov}` is not key=value")))?;
        let (section, field) = locate(&defaults, key)?;
        doc[section][field] = parse_value(raw);
    }
    if let Some(s) = seed {
        doc["train"]["seed"] = Value::from(s);
    }
    let seed_drawn = doc["train"].get("seed").is_none();
    if seed_drawn {
        doc["train"]["seed"] = Value::from(rand::random::<u64>() >> 11);
    }
    let config: RunConfig =
        serde_json::from_value(doc).map_err(|e| AppError::Config(format!("invalid configuration: {e}")))?;
    config.train.validate().map_err(|e| AppError::Config(e.to_string()))?;
    config.oracle.validate().map_err(|e| AppError::Config(e.to_string()))?;
    Ok(Resolved { config, seed_drawn })
}

pub fn to_toml(config: &RunConfig) -> String {
    toml::to_string_pretty(config).expect("config serializes to TOML")
}
