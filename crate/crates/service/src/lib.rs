//! Live interactive testing sessions over HTTP: masked views, picks,
//! suggestions, trajectories and an append-only JSON-lines log per session
//! that is replayed on restart.

pub mod api;
pub mod config;
mod error;
pub mod registry;
pub mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::router;
pub use config::SessionConfig;
pub use error::{Error, Result};
pub use registry::Registry;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    pub default_alpha: f64,
}

/// Open the data directory and serve until ctrl-c.
pub async fn serve(cfg: ServiceConfig) -> Result<()> {
    let registry = Arc::new(Registry::open(&cfg.data_dir, cfg.default_alpha)?);
    let listener = tokio::net::TcpListener::bind(cfg.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, dir = %cfg.data_dir.display(), "listening");
    axum::serve(listener, router(registry))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
