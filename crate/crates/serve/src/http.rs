//! HTTP + JSON routes.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use threebox::{Context, SessionConfig};

use crate::session::{CreatedView, ReportView, RevealView, ServeError, SessionManager, SubmitView};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextRequest {
    pub context: Context,
}

impl IntoResponse for ServeError {
    fn into_response(self) -> Response {
        let status = match self {
            ServeError::UnknownSession => StatusCode::NOT_FOUND,
            ServeError::WrongPhase { .. } => StatusCode::CONFLICT,
            ServeError::InvalidConfig(_) | ServeError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            ServeError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody { code: self.code().to_string(), message: self.to_string() };
        (status, Json(body)).into_response()
    }
}

#[derive(Clone)]
struct AppState {
    manager: Arc<SessionManager>,
    /// Used when `POST /sessions` has an empty body.
    default_config: Option<SessionConfig>,
}

async fn create(State(app): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<CreatedView>), ServeError> {
    let config = if body.iter().all(u8::is_ascii_whitespace) {
        app.default_config
            .clone()
            .ok_or_else(|| ServeError::InvalidConfig("request body must be a session config".into()))?
    } else {
        let text = std::str::from_utf8(&body).map_err(|e| ServeError::InvalidConfig(e.to_string()))?;
        SessionConfig::from_json(text)?
    };
    Ok((StatusCode::CREATED, Json(app.manager.create_session(config)?)))
}

async fn submit(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SubmitView>, ServeError> {
    let req: ContextRequest = serde_json::from_slice(&body).map_err(|e| {
        ServeError::InvalidRequest(format!("expected {{\"context\": \"M1\" | \"M2\" | \"none\"}}: {e}"))
    })?;
    Ok(Json(app.manager.submit_context(&id, req.context)?))
}

async fn reveal(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<RevealView>, ServeError> {
    Ok(Json(app.manager.reveal_and_settle(&id)?))
}

async fn report(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<ReportView>, ServeError> {
    Ok(Json(app.manager.session_report(&id)?))
}

/// `default_config`, if given, backs `POST /sessions` requests with no body.
pub fn router(manager: Arc<SessionManager>, default_config: Option<SessionConfig>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/context", post(submit))
        .route("/sessions/{id}/reveal", post(reveal))
        .route("/sessions/{id}/report", get(report))
        .with_state(AppState { manager, default_config })
}

/// Serves until the listener fails, sweeping idle sessions in the background.
pub async fn serve(
    addr: SocketAddr,
    manager: Arc<SessionManager>,
    default_config: Option<SessionConfig>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let sweeper = Arc::clone(&manager);
    let period = (manager.idle_timeout() / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let dropped = sweeper.sweep();
            if dropped > 0 {
                log::info!("expired {dropped} idle sessions");
            }
        }
    });
    axum::serve(listener, router(manager, default_config)).await
}
