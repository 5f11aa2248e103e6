use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use super::service::{AdjudicationRequest, TriageError, TriageService};
use crate::calculators::CalculatorRegistry;

#[derive(Debug, Clone, Default)]
pub struct HttpConfig {
    /// Required bearer token. `None` disables authentication.
    pub bearer_token: Option<String>,
    /// Allowed browser origins; empty allows any origin.
    pub cors_origins: Vec<String>,
}

impl IntoResponse for TriageError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            TriageError::NotInQueue(_) => (StatusCode::NOT_FOUND, "not_in_queue"),
            TriageError::WrongReviewer { .. } => (StatusCode::FORBIDDEN, "wrong_reviewer"),
            TriageError::AlreadyAdjudicated(_) => (StatusCode::CONFLICT, "already_adjudicated"),
            TriageError::ParseFailure { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "parse_failure"),
            TriageError::EmptyInput => (StatusCode::CONFLICT, "no_adjudications"),
            TriageError::Log(_) | TriageError::LogRead(_) | TriageError::Stats(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        (status, Json(json!({"error": code, "message": self.to_string()}))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct QueueParams {
    reviewer: Option<String>,
}

async fn queue(State(svc): State<Arc<TriageService>>, Query(params): Query<QueueParams>) -> Response {
    Json(svc.queue_for(params.reviewer.as_deref())).into_response()
}

async fn blind(State(svc): State<Arc<TriageService>>, Path(id): Path<String>) -> Response {
    match svc.blind_packet(&id) {
        Ok(packet) => Json(packet).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn adjudicate(
    State(svc): State<Arc<TriageService>>,
    Path(id): Path<String>,
    Json(body): Json<AdjudicationRequest>,
) -> Response {
    match svc.submit(&id, body) {
        Ok(record) => (StatusCode::CREATED, Json(record)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn validation(State(svc): State<Arc<TriageService>>) -> Response {
    let svc = svc.clone();
    // Bootstrapping is CPU-bound.
    match tokio::task::spawn_blocking(move || svc.validation_report()).await {
        Ok(Ok(report)) => Json(json!({
            "n_adjudicated": report.n_adjudicated,
            "original": report.original,
            "new": report.new,
            "table": report.table(),
        }))
        .into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(_) => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}

async fn calculators() -> Response {
    Json(CalculatorRegistry::builtin().manifest()).into_response()
}

async fn require_bearer(State(token): State<Arc<str>>, request: Request, next: Next) -> Response {
    let presented = request
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented != Some(&*token) {
        return (
            StatusCode::UNAUTHORIZED,
            Json(json!({"error": "unauthorized", "message": "missing or invalid bearer token"})),
        )
            .into_response();
    }
    next.run(request).await
}

pub fn router(service: Arc<TriageService>, config: &HttpConfig) -> Router {
    let mut app = Router::new()
        .route("/queue", get(queue))
        .route("/instances/{id}/blind", get(blind))
        .route("/instances/{id}/adjudication", post(adjudicate))
        .route("/reports/validation", get(validation))
        .route("/calculators", get(calculators))
        .with_state(service);
    if let Some(token) = &config.bearer_token {
        let token: Arc<str> = token.as_str().into();
        app = app.layer(middleware::from_fn_with_state(token, require_bearer));
    }
    let origins = if config.cors_origins.is_empty() {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(config.cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    app.layer(
        CorsLayer::new()
            .allow_origin(origins)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]),
    )
}
