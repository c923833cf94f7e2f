//! HTTP API and server-sent event stream.

use std::convert::Infallible;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use futures::{stream, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use telavatar_core::edge::{EdgeError, EdgeEvent, Mode};
use telavatar_core::nav::{PlanError, RouteError};
use telavatar_core::proto::Command;
use tokio::sync::broadcast::error::RecvError;

use crate::{EdgeHandle, LoopClosed};

/// Client reconnect delay advertised on the event stream.
pub const SSE_RETRY: Duration = Duration::from_millis(1000);

pub fn router(edge: EdgeHandle) -> Router {
    Router::new()
        .route("/api/v1/state", get(state))
        .route("/api/v1/map", get(map))
        .route("/api/v1/mode", put(set_mode))
        .route("/api/v1/commands", post(commands))
        .route("/api/v1/goal", post(goal))
        .route("/api/v1/stop", post(stop))
        .route("/api/v1/events", get(events))
        .with_state(edge)
}

struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl ToString) -> Self {
        Self { status, kind, message: message.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "kind": self.kind }))).into_response()
    }
}

impl From<LoopClosed> for ApiError {
    fn from(e: LoopClosed) -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "unavailable", e)
    }
}

impl From<EdgeError> for ApiError {
    fn from(e: EdgeError) -> Self {
        use StatusCode as S;
        let (status, kind) = match &e {
            EdgeError::WrongMode { .. } => (S::CONFLICT, "wrong_mode"),
            EdgeError::NoPose => (S::CONFLICT, "no_pose"),
            EdgeError::SessionDead => (S::SERVICE_UNAVAILABLE, "session_dead"),
            EdgeError::Protocol(_) => (S::SERVICE_UNAVAILABLE, "protocol"),
            EdgeError::Malformed(_) => (S::UNPROCESSABLE_ENTITY, "malformed"),
            EdgeError::Route(RouteError::Plan(p)) => (
                S::UNPROCESSABLE_ENTITY,
                match p {
                    PlanError::StartOutOfBounds => "start_out_of_bounds",
                    PlanError::GoalOutOfBounds => "goal_out_of_bounds",
                    PlanError::StartOccupied => "start_occupied",
                    PlanError::GoalOccupied => "goal_occupied",
                    PlanError::Unreachable => "unreachable",
                },
            ),
            EdgeError::Route(RouteError::Discretize(_)) => (S::UNPROCESSABLE_ENTITY, "discretize"),
        };
        ApiError::new(status, kind, e)
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed", e))
}

async fn state(State(edge): State<EdgeHandle>) -> Result<Response, ApiError> {
    Ok(Json(edge.snapshot().await?).into_response())
}

async fn map(State(edge): State<EdgeHandle>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], edge.map_text().to_string()).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeBody {
    mode: Mode,
}

async fn set_mode(State(edge): State<EdgeHandle>, body: Bytes) -> Result<Response, ApiError> {
    let ModeBody { mode } = parse(&body)?;
    Ok(Json(edge.set_mode(mode).await?).into_response())
}

async fn commands(State(edge): State<EdgeHandle>, body: Bytes) -> Result<Response, ApiError> {
    let cmd: Command = parse(&body)?;
    let id = edge.submit(cmd).await??;
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id }))).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalBody {
    x: f64,
    y: f64,
}

async fn goal(State(edge): State<EdgeHandle>, body: Bytes) -> Result<Response, ApiError> {
    let GoalBody { x, y } = parse(&body)?;
    let plan = edge.goal(x, y).await??;
    let path: Vec<[f64; 2]> = plan.route.path.waypoints.iter().map(|&(x, y)| [x, y]).collect();
    let body = json!({ "id_first": plan.id_first, "count": plan.count, "path": path });
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

async fn stop(State(edge): State<EdgeHandle>) -> Result<Response, ApiError> {
    let id = edge.stop().await??;
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id }))).into_response())
}

fn sse_event(e: &EdgeEvent) -> Event {
    Event::default().event(e.kind.as_str()).id(e.id.to_string()).data(e.data.to_string())
}

async fn events(State(edge): State<EdgeHandle>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let hello = stream::once(async { Ok(Event::default().retry(SSE_RETRY).comment("connected")) });
    let live = stream::unfold(edge.subscribe(), |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(e) => return Some((Ok(sse_event(&e)), rx)),
                Err(RecvError::Lagged(n)) => log::warn!("event stream client skipped {n} events"),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(hello.chain(live).take_until(edge.closed())).keep_alive(KeepAlive::default())
}
