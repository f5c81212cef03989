//! HTTP service for interactive abbreviation expansion: dialogue sessions,
//! KeywordAE and FillMask endpoints, and event-log summaries.

pub mod api;
pub mod session;
pub mod summary;

pub use api::{router, AppState, ServiceConfig};
pub use session::{Session, SessionError, SessionStore};
pub use summary::{events_from_trace, summarize_session, EventKind, LogEvent, SessionSummary};

/// Serves until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
