//! Model Context Protocol runtime.
//!
//! JSON-RPC 2.0 envelopes, a server with a tool registry and capability
//! handshake, and a client. Two transports carry the same envelopes:
//!
//! - **stdio**: newline-delimited, one canonical single-line object per message
//! - **http**: one envelope per POST body, sessions keyed by the
//!   `mcp-session-id` header issued at `initialize`
//!
//! Methods: `initialize`, `tools/list`, `tools/call` (params `{name, arguments}`),
//! plus list-only `resources/list` / `prompts/list`, `ping`, and `close`.

pub mod client;
pub mod envelope;
pub mod framing;
pub mod http;
pub mod schema;
pub mod server;

pub use client::{call_http, ClientError, HttpTransport, InProcessTransport, McpClient, StdioTransport, Transport, TransportError};
pub use envelope::{codes, DecodeError, RequestId, RpcEnvelope, RpcError};
pub use framing::{encode_frame, serve_stdio, LineFramer};
pub use http::{serve_http, HttpServerHandle, MCP_PATH, SESSION_HEADER};
pub use schema::{InputSchema, ParamType};
pub use server::{Capabilities, McpServer, Session, SessionState, ToolDescriptor, TransportKind, PROTOCOL_VERSION};

use serde_json::Value;

/// Pull a typed argument out of a tool's argument object.
pub fn arg<T: serde::de::DeserializeOwned>(args: &Value, name: &str) -> Result<T, String> {
    serde_json::from_value(args.get(name).cloned().unwrap_or(Value::Null))
        .map_err(|e| format!("argument '{name}': {e}"))
}

/// Like [`arg`], but `None` when the argument is absent or null.
pub fn opt_arg<T: serde::de::DeserializeOwned>(args: &Value, name: &str) -> Result<Option<T>, String> {
    match args.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| format!("argument '{name}': {e}")),
    }
}
