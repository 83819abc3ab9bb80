//! Gateway configuration: a bundle manifest plus three service keys.
//!
//! ```text
//! listen = 127.0.0.1:8080
//! upstream = http://127.0.0.1:9000
//! audit_log = audit.jsonl
//! so = ehealth_so.xml
//! ...
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use sacpdp_core::bundle::FlatConfig;
use sacpdp_core::{Bundle, BundleError};

pub const CONFIG_ENV: &str = "SACPDP_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("invalid listen address {0:?}")]
    Listen(String),
    #[error("invalid upstream URL {0:?}: expected http://host[:port][/base]")]
    Upstream(String),
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub listen: SocketAddr,
    /// Base URL with no trailing slash.
    pub upstream: String,
    pub audit_log: PathBuf,
    pub bundle: Bundle,
}

impl GatewayConfig {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        Self::from_flat(&FlatConfig::read(path)?)
    }

    pub fn from_flat(cfg: &FlatConfig) -> Result<Self, ConfigError> {
        let listen = cfg.require("listen")?;
        let listen = listen
            .parse()
            .map_err(|_| ConfigError::Listen(listen.to_string()))?;
        let upstream = cfg.require("upstream")?;
        if !upstream.starts_with("http://") || upstream.len() <= "http://".len() {
            return Err(ConfigError::Upstream(upstream.to_string()));
        }
        Ok(GatewayConfig {
            listen,
            upstream: upstream.trim_end_matches('/').to_string(),
            audit_log: cfg.require_path("audit_log")?,
            bundle: Bundle::from_config(cfg)?,
        })
    }
}

/// `SACPDP_CONFIG` when set, otherwise `given`.
pub fn resolve_path(given: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os(CONFIG_ENV).map(PathBuf::from).or(given)
}
