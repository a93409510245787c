use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: String, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Service settings. Loaded from an optional TOML file, then overridden by
/// `NLPSCOPE_LISTEN`, `NLPSCOPE_MAX_RESOLUTION` and `NLPSCOPE_CACHE_ENTRIES`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    /// Largest grid side accepted by `/sample`; grids are capped at
    /// `max_resolution²` samples per function.
    pub max_resolution: usize,
    /// Memoized responses kept before the oldest is evicted. 0 disables
    /// the cache.
    pub cache_entries: usize,
    /// Serve the index document at `/`.
    pub ui: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            max_resolution: 512,
            cache_entries: 64,
            ui: false,
        }
    }
}

pub const ENV_LISTEN: &str = "NLPSCOPE_LISTEN";
pub const ENV_MAX_RESOLUTION: &str = "NLPSCOPE_MAX_RESOLUTION";
pub const ENV_CACHE_ENTRIES: &str = "NLPSCOPE_CACHE_ENTRIES";

impl ServiceConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Applies overrides from `vars` (normally `std::env::vars()`).
    pub fn with_overrides(mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let number = |name: &str, value: &str| {
            value.parse::<usize>().map_err(|e| ConfigError::Env {
                name: name.to_string(),
                message: e.to_string(),
            })
        };
        for (name, value) in vars {
            match name.as_str() {
                ENV_LISTEN => self.listen = value,
                ENV_MAX_RESOLUTION => self.max_resolution = number(&name, &value)?,
                ENV_CACHE_ENTRIES => self.cache_entries = number(&name, &value)?,
                _ => {}
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// File (when given) plus the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        base.with_overrides(std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_resolution < 2 {
            return Err(ConfigError::Invalid("max_resolution must be at least 2".into()));
        }
        if self.listen.is_empty() {
            return Err(ConfigError::Invalid("listen address is empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_environment() {
        let cfg = ServiceConfig::from_toml_str("max_resolution = 128\ncache_entries = 3", "test").unwrap();
        assert_eq!(cfg.max_resolution, 128);
        assert_eq!(cfg.listen, "127.0.0.1:8080");
        let cfg = cfg
            .with_overrides([
                (ENV_LISTEN.to_string(), "0.0.0.0:9000".to_string()),
                (ENV_CACHE_ENTRIES.to_string(), "0".to_string()),
                ("UNRELATED".to_string(), "x".to_string()),
            ])
            .unwrap();
        assert_eq!(cfg.listen, "0.0.0.0:9000");
        assert_eq!(cfg.cache_entries, 0);
        assert_eq!(cfg.max_resolution, 128);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ServiceConfig::from_toml_str("colour = 1", "t").is_err());
        assert!(ServiceConfig::from_toml_str("max_resolution = 1", "t").is_err());
        let env = [(ENV_MAX_RESOLUTION.to_string(), "lots".to_string())];
        assert!(ServiceConfig::default().with_overrides(env).is_err());
    }
}
