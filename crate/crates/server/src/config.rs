//! Service configuration: built-in defaults, then a TOML file, then
//! `LAGODR_*` environment variables.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::Duration;
use lago_dr_core::discovery::DEFAULT_FEED_K;
use lago_dr_core::oai::{OaiConfig, DEFAULT_PAGE_SIZE, DEFAULT_TOKEN_TTL_HOURS};
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "LAGODR_";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApiConfig {
    /// Socket address to bind.
    pub listen: String,
    pub repository_name: String,
    /// Domain part of OAI identifiers.
    pub repo_id: String,
    /// Public URL of this instance, without a trailing slash.
    pub base_url: String,
    pub page_size: usize,
    pub token_ttl_hours: i64,
    pub data_dir: PathBuf,
    pub feed_k: usize,
    pub admin_email: String,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            listen: "127.0.0.1:8080".into(),
            repository_name: "LAGO Data Repository".into(),
            repo_id: "lago.example.org".into(),
            base_url: "http://127.0.0.1:8080".into(),
            page_size: DEFAULT_PAGE_SIZE,
            token_ttl_hours: DEFAULT_TOKEN_TTL_HOURS,
            data_dir: PathBuf::from("lago-data"),
            feed_k: DEFAULT_FEED_K,
            admin_email: "admin@lago.example.org".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{key}: {message}")]
    Value { key: String, message: String },
}

impl ApiConfig {
    /// Defaults overridden by `file` (when given) and then by `env`.
    pub fn load<I>(file: Option<&Path>, env: I) -> Result<ApiConfig, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
                toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?
            }
            None => ApiConfig::default(),
        };
        for (key, value) in env {
            if let Some(name) = key.strip_prefix(ENV_PREFIX) {
                cfg.set(&name.to_ascii_lowercase(), &value)?;
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
            v.trim().parse().map_err(|_| ConfigError::Value { key: key.into(), message: format!("not a number: {v:?}") })
        }
        match key {
            "listen" => self.listen = value.into(),
            "repository_name" => self.repository_name = value.into(),
            "repo_id" => self.repo_id = value.into(),
            "base_url" => self.base_url = value.into(),
            "page_size" => self.page_size = num(key, value)?,
            "token_ttl_hours" => self.token_ttl_hours = num(key, value)?,
            "data_dir" => self.data_dir = value.into(),
            "feed_k" => self.feed_k = num(key, value)?,
            "admin_email" => self.admin_email = value.into(),
            // Other LAGODR_ variables (log filters, test hooks) are not config.
            _ => {}
        }
        Ok(())
    }

    fn check(&mut self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: &str| Err(ConfigError::Value { key: key.into(), message: message.into() });
        if self.page_size == 0 {
            return bad("page_size", "must be at least 1");
        }
        if self.token_ttl_hours <= 0 {
            return bad("token_ttl_hours", "must be positive");
        }
        if self.feed_k == 0 {
            return bad("feed_k", "must be at least 1");
        }
        if self.repo_id.is_empty() || self.repo_id.contains(|c: char| c.is_whitespace() || c == ':') {
            return bad("repo_id", "must be non-empty, without spaces or colons");
        }
        self.base_url = self.base_url.trim_end_matches('/').to_string();
        Ok(())
    }

    pub fn oai(&self) -> OaiConfig {
        OaiConfig {
            repository_name: self.repository_name.clone(),
            repo_id: self.repo_id.clone(),
            base_url: self.base_url.clone(),
            admin_email: self.admin_email.clone(),
            page_size: self.page_size,
            token_ttl: Duration::hours(self.token_ttl_hours),
        }
    }
}
