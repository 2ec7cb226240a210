//! HTTP transport: one envelope per POST body, sessions keyed by a header.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use tokio::sync::oneshot;

use super::envelope::{codes, RpcEnvelope, RpcError};
use super::server::{McpServer, Session, SessionState, TransportKind};

pub const SESSION_HEADER: &str = "mcp-session-id";
pub const MCP_PATH: &str = "/mcp";

struct HttpState {
    server: Arc<McpServer>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
}

/// A running HTTP endpoint. Dropping the handle shuts the server down.
pub struct HttpServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl HttpServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}{MCP_PATH}", self.addr)
    }

    /// Block the calling thread until the server stops.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for HttpServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn router(server: Arc<McpServer>) -> Router {
    let state = Arc::new(HttpState {
        server,
        sessions: Mutex::new(HashMap::new()),
        next_session: AtomicU64::new(1),
    });
    Router::new().route(MCP_PATH, post(handle_post)).with_state(state)
}

/// Bind `addr` (port 0 picks a free port) and serve on a background runtime.
pub fn serve_http(server: Arc<McpServer>, addr: SocketAddr) -> std::io::Result<HttpServerHandle> {
    spawn_router(router(server), addr)
}

pub(crate) fn spawn_router(app: Router, addr: SocketAddr) -> std::io::Result<HttpServerHandle> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name(format!("http-{addr}"))
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
            rt.shutdown_background();
        })?;
    Ok(HttpServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

fn envelope_response(env: &RpcEnvelope, session: Option<&str>) -> Response {
    let mut resp = (
        StatusCode::OK,
        [(axum::http::header::CONTENT_TYPE, "application/json")],
        env.encode(),
    )
        .into_response();
    if let Some(id) = session.and_then(|s| HeaderValue::from_str(s).ok()) {
        resp.headers_mut().insert(SESSION_HEADER, id);
    }
    resp
}

async fn handle_post(State(state): State<Arc<HttpState>>, headers: HeaderMap, body: String) -> Response {
    let env = match RpcEnvelope::decode(&body) {
        Ok(env) => env,
        Err(e) => return envelope_response(&e.response(), None),
    };
    let header = headers
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);

    let existing = header
        .as_ref()
        .and_then(|h| state.sessions.lock().unwrap().get(h).cloned());
    let (session_id, session, fresh) = match (existing, env.method()) {
        (Some(s), _) => (header.clone().unwrap_or_default(), s, false),
        (None, Some("initialize")) if !env.is_notification() => {
            let n = state.next_session.fetch_add(1, Ordering::Relaxed);
            let id = format!("s{n:08x}");
            (id, Arc::new(Mutex::new(Session::new(TransportKind::Http))), true)
        }
        (None, _) => {
            if env.is_notification() {
                return StatusCode::ACCEPTED.into_response();
            }
            let err = RpcError::new(codes::NOT_INITIALIZED, "missing or unknown session; initialize first");
            return envelope_response(&RpcEnvelope::err(env.id().cloned(), err), None);
        }
    };

    let server = state.server.clone();
    let sess = session.clone();
    let reply = tokio::task::spawn_blocking(move || {
        let mut guard = sess.lock().unwrap();
        let reply = server.handle(&mut guard, env);
        (reply, guard.state())
    })
    .await;
    let (reply, after) = match reply {
        Ok(r) => r,
        Err(e) => {
            let err = RpcError::new(codes::INTERNAL_ERROR, format!("handler panicked: {e}"));
            return envelope_response(&RpcEnvelope::err(None, err), None);
        }
    };

    {
        let mut sessions = state.sessions.lock().unwrap();
        match after {
            SessionState::Ready if fresh => {
                sessions.insert(session_id.clone(), session);
            }
            SessionState::Closed => {
                sessions.remove(&session_id);
            }
            _ => {}
        }
    }

    match reply {
        None => StatusCode::ACCEPTED.into_response(),
        Some(reply) => {
            let issued = (after == SessionState::Ready).then_some(session_id.as_str());
            envelope_response(&reply, issued)
        }
    }
}
