//! HTTP routes.

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::config::SessionConfig;
use crate::registry::{lock, Registry};
use crate::session::{LogLine, PickResult, PolicyKind, Suggestion, TrajectoryRow, View};
use crate::{Error, Result};

const BODY_LIMIT: usize = 64 << 20;
const DEFAULT_SUGGESTIONS: usize = 20;

pub type AppState = Arc<Registry>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create).get(list))
        .route("/sessions/:id/view", get(view))
        .route("/sessions/:id/pick", post(pick))
        .route("/sessions/:id/stop", post(stop))
        .route("/sessions/:id/suggest", get(suggest))
        .route("/sessions/:id/trajectory", get(trajectory))
        .route("/sessions/:id/log", get(log))
        .route("/sessions/:id/events", get(events))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| Error::Malformed(e.to_string()))
}

async fn blocking<T, F>(f: F) -> Result<T>
where
    F: FnOnce() -> Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| Error::Internal(e.to_string()))?
}

async fn create(State(reg): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<View>)> {
    let config: SessionConfig = parse(&body)?;
    let view = blocking(move || reg.create(config)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list(State(reg): State<AppState>) -> impl IntoResponse {
    Json(reg.list())
}

async fn view(State(reg): State<AppState>, Path(id): Path<String>) -> Result<Json<View>> {
    let h = reg.get(&id)?;
    let v = lock(&h).view();
    Ok(Json(v))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PickRequest {
    pub hypothesis_id: usize,
}

async fn pick(State(reg): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<PickResult>> {
    let req: PickRequest = parse(&body)?;
    let h = reg.get(&id)?;
    let out = blocking(move || lock(&h).pick(req.hypothesis_id)).await?;
    Ok(Json(out))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StopResponse {
    pub status: gnt_core::engine::Status,
}

async fn stop(State(reg): State<AppState>, Path(id): Path<String>) -> Result<Json<StopResponse>> {
    let h = reg.get(&id)?;
    let status = blocking(move || lock(&h).stop()).await?;
    Ok(Json(StopResponse { status }))
}

#[derive(Debug, Deserialize)]
pub struct SuggestQuery {
    pub policy: String,
    pub limit: Option<usize>,
    pub direction: Option<String>,
}

async fn suggest(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SuggestQuery>,
) -> Result<Json<Suggestion>> {
    let kind = PolicyKind::parse(&q.policy, q.direction.as_deref())?;
    let h = reg.get(&id)?;
    let snapshot = lock(&h).snapshot();
    let limit = q.limit.unwrap_or(DEFAULT_SUGGESTIONS);
    let s = blocking(move || snapshot.suggest(kind, limit)).await?;
    let noted = s.clone();
    blocking(move || lock(&h).note_suggestion(&noted)).await?;
    Ok(Json(s))
}

async fn trajectory(State(reg): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<TrajectoryRow>>> {
    let h = reg.get(&id)?;
    let t = lock(&h).trajectory();
    Ok(Json(t))
}

async fn log(State(reg): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse> {
    let h = reg.get(&id)?;
    let text = lock(&h).log_text();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text))
}

fn sse(line: &LogLine) -> SseEvent {
    let name = serde_json::to_value(line.action).ok().and_then(|v| v.as_str().map(str::to_owned));
    SseEvent::default().event(name.unwrap_or_default()).json_data(line).unwrap_or_default()
}

/// A `state` event with the current view summary, then one event per log line.
async fn events(
    State(reg): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = std::result::Result<SseEvent, Infallible>>>> {
    let h = reg.get(&id)?;
    let (rx, first) = {
        let s = lock(&h);
        let v = s.view();
        let summary = serde_json::json!({
            "session_id": v.session_id, "status": v.status, "k": v.k,
            "statistic": v.statistic, "threshold": v.threshold, "p_anytime": v.p_anytime,
        });
        (s.subscribe(), SseEvent::default().event("state").json_data(summary).unwrap_or_default())
    };
    let updates = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(line) => return Some((Ok(sse(&line)), rx)),
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    let all = stream::once(async move { Ok(first) }).chain(updates);
    Ok(Sse::new(all).keep_alive(KeepAlive::default()))
}
