//! JSON-over-HTTP front end.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::error::SurveyError;
use crate::service::{Submission, SurveyService};

impl IntoResponse for SurveyError {
    fn into_response(self) -> Response {
        let status = match &self {
            SurveyError::UnknownSession(_) => StatusCode::NOT_FOUND,
            SurveyError::Expired(_) | SurveyError::Done => StatusCode::GONE,
            SurveyError::Conflict(_) => StatusCode::CONFLICT,
            SurveyError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = json!({ "error": self.code(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<SurveyService>;

fn cors(service: &SurveyService) -> CorsLayer {
    let origins = &service.config().cors_origins;
    let allow = if origins.is_empty() {
        AllowOrigin::from(Any)
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION])
}

pub fn router(service: Shared) -> Router {
    let cors = cors(&service);
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/question", get(question))
        .route("/sessions/{id}/answer", post(answer))
        .route("/export", get(export))
        .layer(cors)
        .with_state(service)
}

async fn healthz(State(svc): State<Shared>) -> impl IntoResponse {
    Json(json!({
        "status": "ok",
        "survey": svc.definition().id,
        "active_sessions": svc.active_sessions(),
    }))
}

async fn create_session(State(svc): State<Shared>) -> Result<impl IntoResponse, SurveyError> {
    Ok((StatusCode::CREATED, Json(svc.create_session()?)))
}

async fn question(State(svc): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, SurveyError> {
    Ok(Json(svc.question(&id)?))
}

async fn answer(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, SurveyError> {
    let sub: Submission =
        serde_json::from_slice(&body).map_err(|e| SurveyError::Validation(format!("malformed answer body: {e}")))?;
    Ok(Json(svc.answer(&id, &sub)?))
}

async fn export(State(svc): State<Shared>, headers: HeaderMap) -> Response {
    let Some(expected) = svc.config().export_token.as_deref() else {
        return (StatusCode::FORBIDDEN, Json(json!({ "error": "export_disabled" }))).into_response();
    };
    let supplied = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if supplied != Some(expected) {
        return (StatusCode::UNAUTHORIZED, Json(json!({ "error": "unauthorized" }))).into_response();
    }
    match svc.export_csv() {
        Ok(csv) => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response(),
        Err(e) => e.into_response(),
    }
}

/// Serves until `shutdown` resolves, purging idle sessions in the background.
pub async fn serve(
    listener: TcpListener,
    service: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let every = service
        .config()
        .idle_timeout
        .min(Duration::from_secs(60))
        .max(Duration::from_secs(1));
    let purger = {
        let svc = service.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            loop {
                tick.tick().await;
                let n = svc.purge_expired();
                if n > 0 {
                    tracing::info!(expired = n, "purged idle sessions");
                }
            }
        })
    };
    let result = axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await;
    purger.abort();
    result
}
