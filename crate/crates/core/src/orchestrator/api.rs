//! HTTP control API and server-sent event stream for dashboards and the CLI.
//!
//! | route            | body                                         |
//! |------------------|----------------------------------------------|
//! | `GET /study`     | current [`StudyView`]                        |
//! | `GET /rounds`    | `[RoundSummary]`                             |
//! | `GET /trace`     | `{total, offset, events}`; `?offset=&limit=` |
//! | `GET /field`     | density field; `?design=a,b,c,d&resolution=` |
//! | `POST /command`  | [`ExpertCommand`] -> `{ack, command}`        |
//! | `GET /events`    | every trace event, replayed then live        |

use std::convert::Infallible;
use std::net::SocketAddr;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value};

use super::control::{ControlError, ControlHandle, ExpertCommand};
use crate::design::TraceKind;
use crate::mcp::http::spawn_router;
use crate::mcp::HttpServerHandle;
use crate::surrogate::{predict_field, SplineDesign, SurrogateConfig};

pub const DEFAULT_PAGE: usize = 100;

fn error(status: StatusCode, code: &str, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": message.to_string(), "code": code }))).into_response()
}

fn control_error(e: ControlError) -> Response {
    let status = match e {
        ControlError::NoActiveStudy => StatusCode::NOT_FOUND,
        ControlError::InvalidBounds(_) => StatusCode::BAD_REQUEST,
        ControlError::NoPendingApproval => StatusCode::CONFLICT,
    };
    error(status, e.code(), e)
}

fn no_study() -> Response {
    control_error(ControlError::NoActiveStudy)
}

async fn study(State(h): State<ControlHandle>) -> Response {
    match h.view() {
        Some(v) => Json(v).into_response(),
        None => no_study(),
    }
}

async fn rounds(State(h): State<ControlHandle>) -> Response {
    if h.view().is_none() {
        return no_study();
    }
    Json(h.rounds()).into_response()
}

#[derive(Debug, Deserialize)]
struct Page {
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn trace(State(h): State<ControlHandle>, Query(p): Query<Page>) -> Response {
    if h.view().is_none() {
        return no_study();
    }
    let offset = p.offset.unwrap_or(0);
    let events = h.hub().page(offset, p.limit.unwrap_or(DEFAULT_PAGE));
    Json(json!({ "total": h.hub().len(), "offset": offset, "events": events })).into_response()
}

#[derive(Debug, Deserialize)]
struct FieldQuery {
    design: Option<String>,
    resolution: Option<usize>,
}

async fn field(State(h): State<ControlHandle>, Query(q): Query<FieldQuery>) -> Response {
    let Some(view) = h.view() else {
        return no_study();
    };
    let Some(cfg) = view.surrogate.clone() else {
        return error(StatusCode::CONFLICT, "not_surrogate", "field rendering needs the surrogate backend");
    };
    let design: Vec<f64> = match q.design {
        Some(s) => match s.split(',').map(|t| t.trim().parse::<f64>()).collect() {
            Ok(v) => v,
            Err(e) => return error(StatusCode::BAD_REQUEST, "bad_design", e),
        },
        None => match view.incumbent {
            Some(c) => c.design,
            None => return error(StatusCode::BAD_REQUEST, "bad_design", "no design given and no incumbent yet"),
        },
    };
    let cfg = match q.resolution {
        Some(n) => SurrogateConfig { nx: n, ny: n, ..cfg },
        None => cfg,
    };
    let result = SplineDesign::from_slice(&design)
        .map_err(|e| e.to_string())
        .and_then(|d| predict_field(&d, &cfg).map_err(|e| e.to_string()));
    match result {
        Ok(f) => Json(json!({ "design": design, "field": f })).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, "bad_design", e),
    }
}

async fn command(State(h): State<ControlHandle>, body: axum::body::Bytes) -> Response {
    let cmd: ExpertCommand = match serde_json::from_slice(&body) {
        Ok(c) => c,
        Err(e) => return error(StatusCode::BAD_REQUEST, "bad_command", e),
    };
    // Stop may wait for running jobs to wind down.
    match tokio::task::spawn_blocking(move || h.command(cmd)).await {
        Ok(Ok(ack)) => Json(ack).into_response(),
        Ok(Err(e)) => control_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
    }
}

fn event_stream(h: ControlHandle) -> impl Stream<Item = Result<Event, Infallible>> {
    let rx = h.hub().subscribe();
    futures::stream::unfold((0usize, rx, false, h), |(cursor, mut rx, ended, h)| async move {
        if ended {
            return None;
        }
        loop {
            if let Some(ev) = h.hub().get(cursor) {
                let end = ev.kind == TraceKind::StudyEnd;
                let kind = serde_json::to_value(ev.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default();
                let data = serde_json::to_string(&ev).unwrap_or_default();
                let item = Event::default().id(cursor.to_string()).event(kind).data(data);
                return Some((Ok(item), (cursor + 1, rx, end, h)));
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    })
}

async fn events(State(h): State<ControlHandle>) -> impl IntoResponse {
    Sse::new(event_stream(h)).keep_alive(KeepAlive::default())
}

pub fn control_router(handle: ControlHandle) -> Router {
    Router::new()
        .route("/study", get(study))
        .route("/rounds", get(rounds))
        .route("/trace", get(trace))
        .route("/field", get(field))
        .route("/command", post(command))
        .route("/events", get(events))
        .with_state(handle)
}

/// Bind `addr` (port 0 picks a free port) and serve the control API.
pub fn serve_control_api(handle: ControlHandle, addr: SocketAddr) -> std::io::Result<HttpServerHandle> {
    spawn_router(control_router(handle), addr)
}

/// Parse one `data:` payload of the event stream back into JSON.
pub fn parse_sse_data(line: &str) -> Option<Value> {
    line.strip_prefix("data:").and_then(|d| serde_json::from_str(d.trim_start()).ok())
}
