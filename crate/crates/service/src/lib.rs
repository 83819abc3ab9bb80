//! The enforcement gateway: an HTTP front end that decides every client
//! request against the active policy store and proxies only permitted ones
//! to the upstream resource server.

pub mod audit;
pub mod config;
pub mod gateway;
pub mod http;

use std::future::Future;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use sacpdp_core::BundleError;
use tokio::net::TcpListener;

pub use audit::{AuditLog, AuditRecord};
pub use config::{ConfigError, GatewayConfig};
pub use gateway::{AdminKind, Gateway};
pub use http::router;

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("cannot open audit log {path}: {source}")]
    Audit {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Loads the bundle and opens the audit log.
pub fn build_gateway(cfg: &GatewayConfig) -> Result<Gateway, StartError> {
    let deployment = cfg.bundle.load()?.deployment;
    let audit = AuditLog::open(&cfg.audit_log).map_err(|source| StartError::Audit {
        path: cfg.audit_log.clone(),
        source,
    })?;
    Ok(Gateway::new(deployment, audit, cfg.upstream.clone()))
}

/// Serves until `shutdown` resolves, then flushes the audit log.
pub async fn serve(
    listener: TcpListener,
    gateway: Arc<Gateway>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    let result = axum::serve(listener, router(gateway.clone()))
        .with_graceful_shutdown(shutdown)
        .await;
    gateway.audit.flush()?;
    result
}
