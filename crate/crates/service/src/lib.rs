//! Session service for interactive sketching: strokes in, shadow guidance
//! and refined previews out, over HTTP and a WebSocket push channel.

pub mod http;
pub mod session;
pub mod wire;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use http::{router, AppState};
pub use session::{Engine, SessionConfig, SessionId, SessionManager, SessionResult, SettingsUpdate, Snapshot};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no manifold store is loaded")]
    NoStore,
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] facemanifold::Error),
}

pub struct ServerConfig {
    pub addr: SocketAddr,
    pub export_root: PathBuf,
    pub default_k: Option<usize>,
}

/// Binds and serves until the process is stopped.
pub async fn serve(engine: Engine, config: ServerConfig) -> std::io::Result<()> {
    let manager = SessionManager::new(Some(Arc::new(engine)), config.default_k)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
    let state = AppState::new(manager, config.export_root);
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
