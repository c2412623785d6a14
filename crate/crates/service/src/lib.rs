//! HTTP service exposing catena management, form submission, role-filtered
//! view models, repository browsing, and composition.

pub mod auth;
pub mod config;
mod error;
mod routes;
pub mod state;

use std::time::Duration;

use thiserror::Error;
use tokio::net::TcpListener;

pub use auth::{Principal, Principals};
pub use config::{ConfigError, ServiceConfig};
pub use error::ApiError;
pub use routes::router;
pub use state::{AppState, Shared};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot open store: {0}")]
    Store(#[from] watchtower_core::store::StoreError),
    #[error("cannot listen on `{addr}`: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),
}

/// Opens the store and credentials named by `config`.
pub fn build_state(config: &ServiceConfig) -> Result<AppState, ServiceError> {
    let users = config::load_credentials(&config.credentials)?;
    let shared = Shared::open(&config.store, config.data_dir())?;
    Ok(AppState::new(shared, Principals::new(users)))
}

/// Polls pull-bound entries every `interval` until the runtime shuts down.
pub fn spawn_poller(state: AppState, interval: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(interval);
        loop {
            ticker.tick().await;
            let report = state.shared.write().await.poll(chrono::Utc::now());
            for (entry, outcome) in report {
                if let Ok(version) = outcome {
                    tracing::info!(%entry, version, "pulled");
                }
            }
        }
    })
}

/// Binds the configured address and serves until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = build_state(&config)?;
    let listener = TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    if let Some(secs) = config.poll_interval_s {
        spawn_poller(state.clone(), Duration::from_secs(secs));
    }
    tracing::info!(addr = %config.bind, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
