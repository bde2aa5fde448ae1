//! Runtime configuration shared by the CLI and the service.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counters::{DEFAULT_BUCKET_WIDTH, DEFAULT_WINDOW_LENGTH};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// All tunables, JSON-serializable. Unspecified fields take defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Recent-window length in seconds.
    pub window_length: u64,
    /// Bucket width in seconds; must divide `window_length`.
    pub bucket_width: u64,
    /// Tolerated backwards timestamp jump between log lines, seconds.
    pub regression_slack: u64,
    /// Slot-block size.
    pub k: usize,
    pub damping: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Local-popularity blend strength.
    pub lambda: f64,
    /// Top-left slot boost.
    pub beta: f64,
    /// Zipf exponent for synthesized attractiveness.
    pub zipf_s: f64,
    /// Minimum cosine similarity for a sentence-graph edge.
    pub similarity_threshold: f64,
    /// Maximum similarity a summary sentence may have to one already picked.
    pub redundancy_cap: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            window_length: DEFAULT_WINDOW_LENGTH,
            bucket_width: DEFAULT_BUCKET_WIDTH,
            regression_slack: 0,
            k: 5,
            damping: 0.85,
            epsilon: 1e-10,
            max_iter: 200,
            lambda: 1.0,
            beta: 0.25,
            zipf_s: 1.2,
            similarity_threshold: 0.1,
            redundancy_cap: 0.7,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let display = path.display().to_string();
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: display.clone(),
            source,
        })?;
        let config: Config =
            serde_json::from_str(&raw).map_err(|source| ConfigError::Parse {
                path: display,
                source,
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.bucket_width == 0
            || self.window_length == 0
            || !self.window_length.is_multiple_of(self.bucket_width)
        {
            return fail(format!(
                "window_length {} must be a positive multiple of bucket_width {}",
                self.window_length, self.bucket_width
            ));
        }
        if self.k == 0 {
            return fail("k must be at least 1".to_string());
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return fail(format!("damping {} must lie in (0, 1)", self.damping));
        }
        let epsilon_ok = self.epsilon.is_finite() && self.epsilon > 0.0;
        if !epsilon_ok {
            return fail(format!("epsilon {} must be positive", self.epsilon));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1".to_string());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda {} must be non-negative", self.lambda));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail(format!("beta {} must be non-negative", self.beta));
        }
        if !(self.zipf_s > 0.0 && self.zipf_s.is_finite()) {
            return fail(format!("zipf_s {} must be positive", self.zipf_s));
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return fail(format!(
                "similarity_threshold {} must lie in [0, 1]",
                self.similarity_threshold
            ));
        }
        if !(0.0..=1.0).contains(&self.redundancy_cap) {
            return fail(format!(
                "redundancy_cap {} must lie in [0, 1]",
                self.redundancy_cap
            ));
        }
        Ok(())
    }
}
