//! HTTP service for ToS question answering: query, status, submission and
//! metrics endpoints plus the background crawl worker.

pub mod api;
pub mod bench;
pub mod config;
pub mod error;
pub mod metrics;
pub mod state;
pub mod worker;

use std::future::Future;
use std::sync::Arc;

use tokio::net::TcpListener;
use tokio::sync::watch;

pub use config::ServiceConfig;
pub use error::{ApiError, ErrorBody};
pub use state::{engine_from_config, AppState, QueryRequest, QueryResponse, ServiceError};

/// Serves the API on `listener` and runs the worker until `shutdown`
/// resolves.
pub async fn run(state: Arc<AppState>, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    let (stop_tx, stop_rx) = watch::channel(false);
    let worker = tokio::spawn(Arc::clone(&state.worker).run(
        state.config.poll_interval(),
        state.config.scheduler_interval(),
        stop_rx,
    ));
    let app = api::router(Arc::clone(&state));
    let served = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            shutdown.await;
            let _ = stop_tx.send(true);
        })
        .await;
    let _ = worker.await;
    served
}

/// Opens the store, binds `config.listen_addr` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = tokio::task::spawn_blocking(move || AppState::open(config))
        .await
        .map_err(|e| std::io::Error::other(e.to_string()))??;
    let listener = TcpListener::bind(state.config.listen_addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    run(state, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
