//! HTTP transport for [`CampaignStore`].
//!
//! Routes:
//! - `GET  /campaigns`
//! - `POST /campaigns`
//! - `GET  /campaigns/{id}`
//! - `POST /campaigns/{id}/suggest`
//! - `POST /campaigns/{id}/results`
//! - `GET  /campaigns/{id}/events`
//!
//! Policy computation runs on the blocking pool while holding the campaign lock.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;

use crate::api::{
    CampaignList, CreateCampaignRequest, ErrorBody, SubmitResultsRequest, SuggestRequest, SCHEMA_VERSION,
};
use crate::{CampaignStore, ServiceError};

/// Pools of 10⁵ fingerprints as hex fit comfortably.
const BODY_LIMIT: usize = 256 * 1024 * 1024;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownCampaign(_) => StatusCode::NOT_FOUND,
            ServiceError::PendingBatch { .. } | ServiceError::DuplicateObservation(_) => StatusCode::CONFLICT,
            ServiceError::Exhausted => StatusCode::CONFLICT,
            ServiceError::UnknownLigand(_)
            | ServiceError::NonFinitePic { .. }
            | ServiceError::NotInBatch(_)
            | ServiceError::BatchTooLarge { .. }
            | ServiceError::SchemaVersion(_)
            | ServiceError::InvalidRequest(_)
            | ServiceError::Config(_)
            | ServiceError::Pool(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Policy(_)
            | ServiceError::CorruptLog { .. }
            | ServiceError::Replay(_)
            | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            schema_version: SCHEMA_VERSION,
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

type AppState = Arc<CampaignStore>;

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::InvalidRequest(e.to_string()))
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
}

async fn list(State(store): State<AppState>) -> Json<CampaignList> {
    Json(CampaignList {
        schema_version: SCHEMA_VERSION,
        campaigns: store.list(),
    })
}

async fn create(State(store): State<AppState>, body: Bytes) -> Result<Response, ServiceError> {
    let request: CreateCampaignRequest = parse(&body)?;
    let summary = blocking(move || store.create(request)).await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn state(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(store.summary(&id)?).into_response())
}

async fn suggest(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ServiceError> {
    let request: SuggestRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SuggestRequest {
            schema_version: SCHEMA_VERSION,
            force: false,
        }
    } else {
        parse(&body)?
    };
    crate::api::check_version(request.schema_version)?;
    let response = blocking(move || store.suggest(&id, request.force)).await?;
    Ok(Json(response).into_response())
}

async fn results(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ServiceError> {
    let request: SubmitResultsRequest = parse(&body)?;
    let summary = blocking(move || store.submit(&id, &request)).await?;
    Ok(Json(summary).into_response())
}

async fn events(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let events = blocking(move || store.events(&id)).await?;
    Ok(Json(serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "events": events,
    }))
    .into_response())
}

pub fn router(store: Arc<CampaignStore>) -> Router {
    Router::new()
        .route("/campaigns", get(list).post(create))
        .route("/campaigns/{id}", get(state))
        .route("/campaigns/{id}/suggest", post(suggest))
        .route("/campaigns/{id}/results", post(results))
        .route("/campaigns/{id}/events", get(events))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(store)
}

/// Serves until Ctrl-C.
pub async fn serve(store: Arc<CampaignStore>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, dir = %store.dir().display(), "campaign service listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
