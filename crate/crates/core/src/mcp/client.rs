//! Client role over any transport.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Arc;

use serde_json::{json, Value};

use super::envelope::{DecodeError, RequestId, RpcEnvelope, RpcError};
use super::framing::encode_frame;
use super::http::SESSION_HEADER;
use super::server::{Capabilities, McpServer, Session, TransportKind, ToolDescriptor, PROTOCOL_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("i/o: {0}")]
    Io(String),
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("peer closed the connection")]
    Closed,
    #[error("undecodable reply: {0}")]
    Decode(#[from] DecodeError),
}

impl From<std::io::Error> for TransportError {
    fn from(e: std::io::Error) -> Self {
        TransportError::Io(e.to_string())
    }
}

/// Moves one envelope to the peer and returns its reply, if it sends one.
pub trait Transport: Send {
    fn exchange(&mut self, env: &RpcEnvelope) -> Result<Option<RpcEnvelope>, TransportError>;
    fn kind(&self) -> TransportKind;
}

/// Direct calls into a server living in the same process.
pub struct InProcessTransport {
    server: Arc<McpServer>,
    session: Session,
}

impl InProcessTransport {
    pub fn new(server: Arc<McpServer>) -> Self {
        Self {
            server,
            session: Session::new(TransportKind::InProcess),
        }
    }
}

impl Transport for InProcessTransport {
    fn exchange(&mut self, env: &RpcEnvelope) -> Result<Option<RpcEnvelope>, TransportError> {
        Ok(self.server.handle(&mut self.session, env.clone()))
    }

    fn kind(&self) -> TransportKind {
        TransportKind::InProcess
    }
}

/// Line-framed transport over a reader/writer pair, usually a child's pipes.
pub struct StdioTransport<R, W> {
    reader: R,
    writer: W,
    child: Option<Child>,
}

impl<R: BufRead + Send, W: Write + Send> StdioTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            child: None,
        }
    }
}

impl StdioTransport<BufReader<ChildStdout>, ChildStdin> {
    /// Spawn a server process and talk to it over its stdin/stdout.
    pub fn spawn(cmd: &mut Command) -> Result<Self, TransportError> {
        let mut child = cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().ok_or(TransportError::Closed)?;
        let stdout = child.stdout.take().ok_or(TransportError::Closed)?;
        Ok(Self {
            reader: BufReader::new(stdout),
            writer: stdin,
            child: Some(child),
        })
    }
}

impl<R, W> Drop for StdioTransport<R, W> {
    fn drop(&mut self) {
        if let Some(mut c) = self.child.take() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

impl<R: BufRead + Send, W: Write + Send> Transport for StdioTransport<R, W> {
    fn exchange(&mut self, env: &RpcEnvelope) -> Result<Option<RpcEnvelope>, TransportError> {
        self.writer.write_all(encode_frame(env).as_bytes())?;
        self.writer.flush()?;
        if env.is_notification() {
            return Ok(None);
        }
        let mut line = String::new();
        loop {
            line.clear();
            if self.reader.read_line(&mut line)? == 0 {
                return Err(TransportError::Closed);
            }
            if !line.trim().is_empty() {
                break;
            }
        }
        Ok(Some(RpcEnvelope::decode(line.trim_end_matches(['\n', '\r']))?))
    }

    fn kind(&self) -> TransportKind {
        TransportKind::Stdio
    }
}

/// POSTs each envelope to a fixed URL, carrying the session header once issued.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    session: Option<String>,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: url.into(),
            session: None,
        }
    }

    pub fn session_id(&self) -> Option<&str> {
        self.session.as_deref()
    }
}

/// Raw POST helper shared by the transport and by tests.
pub fn call_http(
    agent: &ureq::Agent,
    url: &str,
    session: Option<&str>,
    env: &RpcEnvelope,
) -> Result<(Option<RpcEnvelope>, Option<String>), TransportError> {
    let mut req = agent.post(url).header("content-type", "application/json");
    if let Some(s) = session {
        req = req.header(SESSION_HEADER, s);
    }
    let mut resp = req
        .send(env.encode())
        .map_err(|e| TransportError::Io(e.to_string()))?;
    let status = resp.status().as_u16();
    let issued = resp
        .headers()
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| TransportError::Io(e.to_string()))?;
    match status {
        200 => Ok((Some(RpcEnvelope::decode(&body)?), issued)),
        202 if body.is_empty() => Ok((None, issued)),
        _ => Err(TransportError::Http { status, body }),
    }
}

impl Transport for HttpTransport {
    fn exchange(&mut self, env: &RpcEnvelope) -> Result<Option<RpcEnvelope>, TransportError> {
        let (reply, issued) = call_http(&self.agent, &self.url, self.session.as_deref(), env)?;
        if issued.is_some() {
            self.session = issued;
        }
        Ok(reply)
    }

    fn kind(&self) -> TransportKind {
        TransportKind::Http
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Rpc(#[from] RpcError),
    #[error("tool reported an error: {0}")]
    Tool(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("response id {got:?} does not match request id {expected}")]
    IdMismatch { expected: RequestId, got: Option<RequestId> },
    #[error("peer sent no response to a request")]
    NoResponse,
}

impl ClientError {
    pub fn rpc_code(&self) -> Option<i64> {
        match self {
            ClientError::Rpc(e) => Some(e.code),
            _ => None,
        }
    }
}

pub struct McpClient {
    transport: Box<dyn Transport>,
    next_id: i64,
    capabilities: Option<Capabilities>,
}

impl std::fmt::Debug for McpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("McpClient")
            .field("transport", &self.transport.kind())
            .field("capabilities", &self.capabilities)
            .finish()
    }
}

impl McpClient {
    pub fn new(transport: impl Transport + 'static) -> Self {
        Self {
            transport: Box::new(transport),
            next_id: 1,
            capabilities: None,
        }
    }

    /// In-process client already past the handshake.
    pub fn connect_local(server: Arc<McpServer>, client_name: &str) -> Result<Self, ClientError> {
        let mut c = Self::new(InProcessTransport::new(server));
        c.initialize(client_name)?;
        Ok(c)
    }

    pub fn capabilities(&self) -> Option<&Capabilities> {
        self.capabilities.as_ref()
    }

    pub fn transport_kind(&self) -> TransportKind {
        self.transport.kind()
    }

    /// Send a request and return the reply envelope unchanged.
    pub fn raw_request(&mut self, method: &str, params: Value) -> Result<RpcEnvelope, ClientError> {
        let id = RequestId::Num(self.next_id);
        self.next_id += 1;
        let reply = self
            .transport
            .exchange(&RpcEnvelope::request(id.clone(), method, params))?
            .ok_or(ClientError::NoResponse)?;
        if reply.id() != Some(&id) {
            return Err(ClientError::IdMismatch {
                expected: id,
                got: reply.id().cloned(),
            });
        }
        Ok(reply)
    }

    pub fn request(&mut self, method: &str, params: Value) -> Result<Value, ClientError> {
        match self.raw_request(method, params)? {
            RpcEnvelope::Response { outcome, .. } => outcome.map_err(ClientError::Rpc),
            _ => Err(ClientError::NoResponse),
        }
    }

    pub fn notify(&mut self, method: &str, params: Value) -> Result<(), ClientError> {
        self.transport.exchange(&RpcEnvelope::notification(method, params))?;
        Ok(())
    }

    pub fn initialize(&mut self, client_name: &str) -> Result<Capabilities, ClientError> {
        self.initialize_with_version(client_name, PROTOCOL_VERSION)
    }

    pub fn initialize_with_version(&mut self, client_name: &str, version: &str) -> Result<Capabilities, ClientError> {
        let v = self.request(
            "initialize",
            json!({
                "protocol_version": version,
                "client_info": { "name": client_name, "version": env!("CARGO_PKG_VERSION") },
            }),
        )?;
        let caps: Capabilities = serde_json::from_value(v)
            .map_err(|e| RpcError::new(super::envelope::codes::INTERNAL_ERROR, e.to_string()))?;
        self.notify("notifications/initialized", json!({}))?;
        self.capabilities = Some(caps.clone());
        Ok(caps)
    }

    pub fn list_tools(&mut self) -> Result<Vec<ToolDescriptor>, ClientError> {
        let v = self.request("tools/list", json!({}))?;
        serde_json::from_value(v["tools"].clone())
            .map_err(|e| ClientError::Rpc(RpcError::new(super::envelope::codes::INTERNAL_ERROR, e.to_string())))
    }

    /// Invoke a tool; an in-band tool failure surfaces as [`ClientError::Tool`].
    pub fn call_tool(&mut self, name: &str, arguments: Value) -> Result<Value, ClientError> {
        let v = self.request("tools/call", json!({ "name": name, "arguments": arguments }))?;
        if v["is_error"].as_bool().unwrap_or(false) {
            let msg = v["content"]["message"].as_str().unwrap_or("tool error").to_string();
            return Err(ClientError::Tool(msg));
        }
        Ok(v.get("content").cloned().unwrap_or(Value::Null))
    }

    pub fn close(&mut self) -> Result<(), ClientError> {
        self.request("close", json!({}))?;
        Ok(())
    }
}
