//! Service configuration and static credentials.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::auth::Principal;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration in `{path}`: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// Contents of the service configuration file. Relative paths are resolved
/// against the directory holding the file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    /// Socket address to listen on, for example `127.0.0.1:8080`.
    pub bind: String,
    /// Repository root.
    pub store: PathBuf,
    /// Credentials file.
    pub credentials: PathBuf,
    /// Base directory for file-based pull connectors; defaults to the store root.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Seconds between pull polls; no polling when absent.
    #[serde(default)]
    pub poll_interval_s: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CredentialsFile {
    #[serde(default)]
    users: Vec<Principal>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })
}

fn invalid(path: &Path, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_owned(),
        message: message.into(),
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ServiceConfig = toml::from_str(&read(path)?).map_err(|e| invalid(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.store = base.join(&cfg.store);
        cfg.credentials = base.join(&cfg.credentials);
        cfg.data = cfg.data.map(|d| base.join(d));
        if cfg.poll_interval_s == Some(0) {
            return Err(invalid(path, "poll_interval_s must be positive"));
        }
        Ok(cfg)
    }

    pub fn data_dir(&self) -> &Path {
        self.data.as_deref().unwrap_or(&self.store)
    }
}

/// Reads a credentials file: a list of `[[users]]` tables.
pub fn load_credentials(path: &Path) -> Result<Vec<Principal>, ConfigError> {
    let file: CredentialsFile = toml::from_str(&read(path)?).map_err(|e| invalid(path, e.to_string()))?;
    check_principals(&file.users).map_err(|m| invalid(path, m))?;
    Ok(file.users)
}

/// Tokens and user ids must be unique and every user needs a role.
pub fn check_principals(users: &[Principal]) -> Result<(), String> {
    let mut tokens = BTreeSet::new();
    let mut ids = BTreeMap::new();
    for u in users {
        if u.roles.is_empty() {
            return Err(format!("user `{}` has no roles", u.id));
        }
        if u.token.is_empty() {
            return Err(format!("user `{}` has an empty token", u.id));
        }
        if !tokens.insert(u.token.as_str()) {
            return Err(format!("token of user `{}` is not unique", u.id));
        }
        if ids.insert(u.id.as_str(), ()).is_some() {
            return Err(format!("duplicate user `{}`", u.id));
        }
    }
    Ok(())
}
