use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::ServiceError;
use crate::log::OperationKind;
use crate::registry::{CreateDatasetRequest, CreateSessionRequest, Registry};

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/datasets", post(create_dataset))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/phase1", post(phase1))
        .route("/sessions/{id}/phase2", post(phase2))
        .route("/sessions/{id}/phase3", post(phase3))
        .route("/sessions/{id}/budget", get(budget))
        .fallback(|| async {
            ServiceError::NotFound {
                kind: "route",
                id: String::new(),
            }
        })
        .with_state(registry)
}

/// Serves the API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, registry: Arc<Registry>) -> std::io::Result<()> {
    axum::serve(listener, router(registry)).await
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

/// Runs registry work off the async threads; Phase 3 can be CPU-heavy.
async fn blocking<T, F>(registry: Arc<Registry>, f: F) -> Result<T, ServiceError>
where
    F: FnOnce(&Registry) -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&registry))
        .await
        .map_err(|e| ServiceError::Storage(std::io::Error::other(e)))?
}

async fn create_dataset(State(reg): State<Arc<Registry>>, bytes: Bytes) -> Result<Response, ServiceError> {
    let req: CreateDatasetRequest = body(&bytes)?;
    let created = blocking(reg, move |r| r.create_dataset(&req)).await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn create_session(State(reg): State<Arc<Registry>>, bytes: Bytes) -> Result<Response, ServiceError> {
    let req: CreateSessionRequest = body(&bytes)?;
    let created = blocking(reg, move |r| r.create_session(&req)).await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn phase(reg: Arc<Registry>, id: String, kind: OperationKind, bytes: Bytes) -> Result<Response, ServiceError> {
    let request: Value = body(&bytes)?;
    let response = blocking(reg, move |r| r.phase(&id, kind, request)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], response.to_json()).into_response())
}

async fn phase1(State(reg): State<Arc<Registry>>, Path(id): Path<String>, bytes: Bytes) -> Result<Response, ServiceError> {
    phase(reg, id, OperationKind::Phase1, bytes).await
}

async fn phase2(State(reg): State<Arc<Registry>>, Path(id): Path<String>, bytes: Bytes) -> Result<Response, ServiceError> {
    phase(reg, id, OperationKind::Phase2, bytes).await
}

async fn phase3(State(reg): State<Arc<Registry>>, Path(id): Path<String>, bytes: Bytes) -> Result<Response, ServiceError> {
    phase(reg, id, OperationKind::Phase3, bytes).await
}

async fn budget(State(reg): State<Arc<Registry>>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(reg.budget(&id)?).into_response())
}
