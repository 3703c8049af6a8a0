//! HTTP service over live active-learning experiments.
//!
//! A session wraps one [`poolal_core::harness::Experiment`]. In simulated
//! mode each advance runs a full round against the held ground truth; in
//! human mode an advance publishes the queried rows and the round completes
//! once an annotator has posted a label for every one of them. Routes and
//! payloads are listed in `docs/API.md`.

mod api;
mod error;
mod session;
mod store;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::{router, CreateRequest, CreateResponse, CurveResponse, LabelsRequest};
pub use error::ApiError;
pub use session::{
    Advance, ContextPoint, ImageShape, LabelPair, LabelSubmission, Mode, PendingItem, PendingView, SessionState,
    SessionSummary, SessionView, Submitted,
};
pub use store::{snapshot_path, SessionStore};

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, store: SessionStore) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(Arc::new(store))).await
}
