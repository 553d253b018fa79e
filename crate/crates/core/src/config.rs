use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Label;

/// Knobs of the boosting loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Examples per class shown to the definition oracle each round.
    pub q: usize,
    /// Questions requested per round.
    pub k: usize,
    /// Number of boosting rounds.
    #[serde(alias = "T")]
    pub rounds: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub gamma_clamp: f64,
    pub tie_prediction: Label,
    /// Experimental: search stumps over every column discovered so far.
    pub cumulative_features: bool,
    /// Filter calls allowed per round are `r_max_factor * t`.
    pub r_max_factor: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            q: 10,
            k: 10,
            rounds: 10,
            delta: 0.1,
            epsilon: 0.1,
            seed: 0,
            gamma_clamp: 0.5 - 1e-6,
            tie_prediction: Label::Pos,
            cumulative_features: false,
            r_max_factor: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 || self.k == 0 || self.rounds == 0 {
            return Err(Error::Config("q, k and rounds must be >= 1".to_string()));
        }
        if !(self.gamma_clamp > 0.0 && self.gamma_clamp < 0.5) {
            return Err(Error::Config("gamma_clamp must lie in (0, 0.5)".to_string()));
        }
        for (name, v) in [("delta", self.delta), ("epsilon", self.epsilon)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(alloc::format!("{name} must lie in (0, 1)")));
            }
        }
        if self.r_max_factor == 0 {
            return Err(Error::Config("r_max_factor must be >= 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Scripted,
    Replay,
}

/// How audio reaches an HTTP backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaMode {
    /// Read the file and attach it base64-encoded.
    Inline,
    /// Pass the media reference through as a URI.
    Uri,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    /// Extra attempts after a transport failure.
    pub max_retries: u32,
    pub parallelism: usize,
    pub timeout_ms: u64,
    /// Token-bucket rate limit; 0 disables it.
    pub requests_per_minute: u32,
    pub media_mode: MediaMode,
    /// Synthetic world file for the scripted backend.
    pub world: Option<String>,
    /// Replay journal (record for http, read for replay).
    pub journal: Option<String>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            backend: BackendKind::Scripted,
            endpoint: None,
            model_name: String::new(),
            temperature: 1.0,
            max_retries: 2,
            parallelism: 1,
            timeout_ms: 120_000,
            requests_per_minute: 0,
            media_mode: MediaMode::Inline,
            world: None,
            journal: None,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be >= 1".to_string()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config("temperature must be >= 0".to_string()));
        }
        if self.backend == BackendKind::Http && self.endpoint.is_none() {
            return Err(Error::Config("http backend needs an endpoint".to_string()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainConfig::default();
        assert_eq!((c.q, c.k, c.rounds), (10, 10, 10));
        c.validate().unwrap();
        OracleConfig::default().validate().unwrap();
        assert_eq!(OracleConfig::default().temperature, 1.0);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            TrainConfig { gamma_clamp: 0.5, ..TrainConfig::default() },
            TrainConfig { q: 0, ..TrainConfig::default() },
            TrainConfig { delta: 1.0, ..TrainConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
        let o = OracleConfig { parallelism: 0, ..OracleConfig::default() };
        assert!(o.validate().is_err());
        let o = OracleConfig { temperature: f64::NAN, ..OracleConfig::default() };
        assert!(o.validate().is_err());
    }
}
