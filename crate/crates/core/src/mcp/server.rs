//! Server role: tool registry, capability handshake, and per-session dispatch.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::envelope::{codes, RpcEnvelope, RpcError};
use super::schema::InputSchema;

/// The single protocol revision spoken by every client and server here.
pub const PROTOCOL_VERSION: &str = "mada/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub tools: bool,
    pub resources: bool,
    pub prompts: bool,
    pub server_name: String,
    pub protocol_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub input_schema: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Stdio,
    Http,
    InProcess,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Uninitialized,
    Initializing,
    Ready,
    Closed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientInfo {
    pub name: String,
    #[serde(default)]
    pub version: String,
}

#[derive(Debug)]
pub struct Session {
    state: SessionState,
    transport: TransportKind,
    peer: Option<ClientInfo>,
}

impl Session {
    pub fn new(transport: TransportKind) -> Self {
        Self {
            state: SessionState::Uninitialized,
            transport,
            peer: None,
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn transport(&self) -> TransportKind {
        self.transport
    }

    pub fn peer(&self) -> Option<&ClientInfo> {
        self.peer.as_ref()
    }

    pub fn close(&mut self) {
        self.state = SessionState::Closed;
    }
}

/// Tool body. `Err` becomes an in-band tool error result, never a transport error.
pub type ToolHandler = Arc<dyn Fn(&Value) -> Result<Value, String> + Send + Sync>;

struct Tool {
    descriptor: ToolDescriptor,
    schema: InputSchema,
    handler: ToolHandler,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RegistrationError {
    #[error("tool name must be nonempty")]
    EmptyName,
    #[error("tool '{0}' already registered")]
    Duplicate(String),
}

pub struct McpServer {
    name: String,
    tools: Vec<Tool>,
    resources: bool,
    prompts: bool,
}

impl fmt::Debug for McpServer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("McpServer")
            .field("name", &self.name)
            .field("tools", &self.tools.iter().map(|t| &t.descriptor.name).collect::<Vec<_>>())
            .finish()
    }
}

impl McpServer {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            tools: Vec::new(),
            resources: false,
            prompts: false,
        }
    }

    /// Advertise the resources primitive (list-only; always empty).
    pub fn with_resources(mut self) -> Self {
        self.resources = true;
        self
    }

    /// Advertise the prompts primitive (list-only; always empty).
    pub fn with_prompts(mut self) -> Self {
        self.prompts = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn register<F>(
        &mut self,
        name: &str,
        description: &str,
        schema: InputSchema,
        handler: F,
    ) -> Result<(), RegistrationError>
    where
        F: Fn(&Value) -> Result<Value, String> + Send + Sync + 'static,
    {
        if name.is_empty() {
            return Err(RegistrationError::EmptyName);
        }
        if self.tools.iter().any(|t| t.descriptor.name == name) {
            return Err(RegistrationError::Duplicate(name.into()));
        }
        self.tools.push(Tool {
            descriptor: ToolDescriptor {
                name: name.into(),
                description: description.into(),
                input_schema: schema.to_value(),
            },
            schema,
            handler: Arc::new(handler),
        });
        Ok(())
    }

    pub fn capabilities(&self) -> Capabilities {
        Capabilities {
            tools: true,
            resources: self.resources,
            prompts: self.prompts,
            server_name: self.name.clone(),
            protocol_version: PROTOCOL_VERSION.into(),
        }
    }

    /// Registration order.
    pub fn descriptors(&self) -> Vec<ToolDescriptor> {
        self.tools.iter().map(|t| t.descriptor.clone()).collect()
    }

    /// Process one inbound envelope. Returns `None` for notifications and for
    /// stray responses, which are never answered.
    pub fn handle(&self, session: &mut Session, env: RpcEnvelope) -> Option<RpcEnvelope> {
        match env {
            RpcEnvelope::Notification { method, .. } => {
                if method == "exit" {
                    session.close();
                }
                tracing::debug!(%method, "notification");
                None
            }
            RpcEnvelope::Response { id, .. } => {
                tracing::warn!(?id, "server received a response envelope; ignored");
                None
            }
            RpcEnvelope::Request { id, method, params } => {
                let outcome = self.dispatch(session, &method, &params);
                Some(RpcEnvelope::Response {
                    id: Some(id),
                    outcome,
                })
            }
        }
    }

    fn dispatch(&self, session: &mut Session, method: &str, params: &Value) -> Result<Value, RpcError> {
        if session.state == SessionState::Closed {
            return Err(RpcError::new(codes::SESSION_CLOSED, "session closed"));
        }
        match method {
            "initialize" => self.initialize(session, params),
            "ping" => Ok(json!({})),
            "tools/list" | "tools/call" | "resources/list" | "prompts/list" | "close"
                if session.state != SessionState::Ready =>
            {
                Err(RpcError::new(codes::NOT_INITIALIZED, "session not initialized"))
            }
            "tools/list" => Ok(json!({ "tools": self.descriptors() })),
            "tools/call" => self.call(params),
            "resources/list" if self.resources => Ok(json!({ "resources": [] })),
            "prompts/list" if self.prompts => Ok(json!({ "prompts": [] })),
            "close" => {
                session.close();
                Ok(json!({}))
            }
            other => Err(RpcError::new(
                codes::METHOD_NOT_FOUND,
                format!("method not found: {other}"),
            )),
        }
    }

    fn initialize(&self, session: &mut Session, params: &Value) -> Result<Value, RpcError> {
        if session.state != SessionState::Uninitialized {
            return Err(RpcError::new(codes::DOUBLE_INITIALIZE, "session already initialized"));
        }
        let version = params.get("protocol_version").and_then(Value::as_str);
        if version != Some(PROTOCOL_VERSION) {
            return Err(RpcError::new(
                codes::PROTOCOL_VERSION_MISMATCH,
                format!(
                    "unsupported protocol version {:?}; server speaks {PROTOCOL_VERSION}",
                    version.unwrap_or("<missing>")
                ),
            )
            .with_data(json!({ "supported": [PROTOCOL_VERSION] })));
        }
        session.state = SessionState::Initializing;
        session.peer = params
            .get("client_info")
            .and_then(|c| serde_json::from_value(c.clone()).ok());
        session.state = SessionState::Ready;
        Ok(serde_json::to_value(self.capabilities()).expect("capabilities serialize"))
    }

    fn call(&self, params: &Value) -> Result<Value, RpcError> {
        let name = params
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| RpcError::new(codes::INVALID_PARAMS, "tools/call requires a string 'name'"))?;
        let tool = self
            .tools
            .iter()
            .find(|t| t.descriptor.name == name)
            .ok_or_else(|| RpcError::new(codes::METHOD_NOT_FOUND, format!("unknown tool: {name}")))?;
        let args = params.get("arguments").cloned().unwrap_or(json!({}));
        tool.schema
            .validate(&args)
            .map_err(|m| RpcError::new(codes::INVALID_PARAMS, m))?;
        Ok(match (tool.handler)(&args) {
            Ok(content) => json!({ "content": content, "is_error": false }),
            Err(message) => json!({ "content": { "message": message }, "is_error": true }),
        })
    }
}
