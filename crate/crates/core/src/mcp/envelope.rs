//! JSON-RPC 2.0 envelopes and their canonical single-line encoding.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const JSONRPC_VERSION: &str = "2.0";

/// Reserved JSON-RPC 2.0 error codes.
pub mod codes {
    pub const PARSE_ERROR: i64 = -32700;
    pub const INVALID_REQUEST: i64 = -32600;
    pub const METHOD_NOT_FOUND: i64 = -32601;
    pub const INVALID_PARAMS: i64 = -32602;
    pub const INTERNAL_ERROR: i64 = -32603;
    // Implementation-defined server errors (-32000..=-32099).
    pub const NOT_INITIALIZED: i64 = -32002;
    pub const DOUBLE_INITIALIZE: i64 = -32003;
    pub const PROTOCOL_VERSION_MISMATCH: i64 = -32004;
    pub const SESSION_CLOSED: i64 = -32005;
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RequestId {
    Num(i64),
    Str(String),
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RequestId::Num(n) => write!(f, "{n}"),
            RequestId::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for RequestId {
    fn from(n: i64) -> Self {
        RequestId::Num(n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl RpcError {
    pub fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            data: None,
        }
    }

    pub fn with_data(mut self, data: Value) -> Self {
        self.data = Some(data);
        self
    }
}

impl fmt::Display for RpcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rpc error {}: {}", self.code, self.message)
    }
}

impl std::error::Error for RpcError {}

/// One message on the wire.
///
/// A response whose request could not be identified (parse errors) carries
/// `id: None`, which encodes as `"id": null`.
#[derive(Clone, Debug, PartialEq)]
pub enum RpcEnvelope {
    Request {
        id: RequestId,
        method: String,
        params: Value,
    },
    Notification {
        method: String,
        params: Value,
    },
    Response {
        id: Option<RequestId>,
        outcome: Result<Value, RpcError>,
    },
}

/// Field order of this struct is the canonical key order on the wire.
#[derive(Serialize)]
struct WireOut<'a> {
    jsonrpc: &'static str,
    #[serde(skip_serializing_if = "WireId::is_absent")]
    id: WireId<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<&'a Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a RpcError>,
}

enum WireId<'a> {
    Absent,
    Null,
    Id(&'a RequestId),
}

impl WireId<'_> {
    fn is_absent(&self) -> bool {
        matches!(self, WireId::Absent)
    }
}

impl Serialize for WireId<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            WireId::Absent | WireId::Null => s.serialize_none(),
            WireId::Id(id) => id.serialize(s),
        }
    }
}

/// Failure to turn a line or body into an envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeError {
    pub error: RpcError,
    /// Id salvaged from the raw text, if any.
    pub recovered_id: Option<RequestId>,
}

impl DecodeError {
    /// The error response to send back, when one can be addressed.
    pub fn response(&self) -> RpcEnvelope {
        RpcEnvelope::Response {
            id: self.recovered_id.clone(),
            outcome: Err(self.error.clone()),
        }
    }
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for DecodeError {}

impl RpcEnvelope {
    pub fn request(id: impl Into<RequestId>, method: &str, params: Value) -> Self {
        RpcEnvelope::Request {
            id: id.into(),
            method: method.to_string(),
            params,
        }
    }

    pub fn notification(method: &str, params: Value) -> Self {
        RpcEnvelope::Notification {
            method: method.to_string(),
            params,
        }
    }

    pub fn ok(id: RequestId, result: Value) -> Self {
        RpcEnvelope::Response {
            id: Some(id),
            outcome: Ok(result),
        }
    }

    pub fn err(id: Option<RequestId>, error: RpcError) -> Self {
        RpcEnvelope::Response {
            id,
            outcome: Err(error),
        }
    }

    pub fn id(&self) -> Option<&RequestId> {
        match self {
            RpcEnvelope::Request { id, .. } => Some(id),
            RpcEnvelope::Response { id, .. } => id.as_ref(),
            RpcEnvelope::Notification { .. } => None,
        }
    }

    pub fn method(&self) -> Option<&str> {
        match self {
            RpcEnvelope::Request { method, .. } | RpcEnvelope::Notification { method, .. } => {
                Some(method)
            }
            RpcEnvelope::Response { .. } => None,
        }
    }

    pub fn is_notification(&self) -> bool {
        matches!(self, RpcEnvelope::Notification { .. })
    }

    /// Canonical single-line serialization (no trailing newline).
    pub fn encode(&self) -> String {
        let wire = match self {
            RpcEnvelope::Request { id, method, params } => WireOut {
                jsonrpc: JSONRPC_VERSION,
                id: WireId::Id(id),
                method: Some(method),
                params: Some(params),
                result: None,
                error: None,
            },
            RpcEnvelope::Notification { method, params } => WireOut {
                jsonrpc: JSONRPC_VERSION,
                id: WireId::Absent,
                method: Some(method),
                params: Some(params),
                result: None,
                error: None,
            },
            RpcEnvelope::Response { id, outcome } => WireOut {
                jsonrpc: JSONRPC_VERSION,
                id: id.as_ref().map_or(WireId::Null, WireId::Id),
                method: None,
                params: None,
                result: outcome.as_ref().ok(),
                error: outcome.as_ref().err(),
            },
        };
        // Serializing a Value-only struct cannot fail.
        serde_json::to_string(&wire).expect("envelope serialization")
    }

    /// Decode one serialized envelope.
    pub fn decode(text: &str) -> Result<Self, DecodeError> {
        let value: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => {
                return Err(DecodeError {
                    error: RpcError::new(codes::PARSE_ERROR, format!("parse error: {e}")),
                    recovered_id: recover_id(text),
                })
            }
        };
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, DecodeError> {
        let Value::Object(mut obj) = value else {
            return Err(invalid(None, "envelope must be a JSON object"));
        };
        let id = match obj.remove("id") {
            None => None,
            Some(Value::Null) => Some(None),
            Some(v) => match serde_json::from_value::<RequestId>(v) {
                Ok(id) => Some(Some(id)),
                Err(_) => return Err(invalid(None, "id must be an integer or a string")),
            },
        };
        let salvage = id.clone().flatten();
        if obj.remove("jsonrpc") != Some(Value::String(JSONRPC_VERSION.into())) {
            return Err(invalid(salvage, "jsonrpc must be \"2.0\""));
        }

        if let Some(method) = obj.remove("method") {
            let Value::String(method) = method else {
                return Err(invalid(salvage, "method must be a string"));
            };
            let params = obj.remove("params").unwrap_or(Value::Object(Map::new()));
            if !(params.is_object() || params.is_array()) {
                return Err(invalid(salvage, "params must be an object or array"));
            }
            if obj.contains_key("result") || obj.contains_key("error") {
                return Err(invalid(salvage, "request carries result or error"));
            }
            return match id {
                None => Ok(RpcEnvelope::Notification { method, params }),
                Some(Some(id)) => Ok(RpcEnvelope::Request { id, method, params }),
                Some(None) => Err(invalid(None, "request id must not be null")),
            };
        }

        let Some(id) = id else {
            return Err(invalid(None, "response without id"));
        };
        let outcome = match (obj.remove("result"), obj.remove("error")) {
            (Some(result), None) => Ok(result),
            (None, Some(error)) => match serde_json::from_value::<RpcError>(error) {
                Ok(e) => Err(e),
                Err(_) => return Err(invalid(id, "malformed error object")),
            },
            _ => {
                return Err(invalid(
                    id,
                    "response must carry exactly one of result or error",
                ))
            }
        };
        Ok(RpcEnvelope::Response { id, outcome })
    }
}

fn invalid(id: Option<RequestId>, msg: &str) -> DecodeError {
    DecodeError {
        error: RpcError::new(codes::INVALID_REQUEST, msg),
        recovered_id: id,
    }
}

/// Best-effort scan for `"id": <int|string>` in text that failed to parse.
fn recover_id(text: &str) -> Option<RequestId> {
    let at = text.find("\"id\"")?;
    let rest = text[at + 4..].trim_start().strip_prefix(':')?.trim_start();
    if let Some(s) = rest.strip_prefix('"') {
        let end = s.find('"')?;
        return Some(RequestId::Str(s[..end].to_string()));
    }
    let digits: String = rest
        .chars()
        .enumerate()
        .take_while(|(i, c)| c.is_ascii_digit() || (*i == 0 && *c == '-'))
        .map(|(_, c)| c)
        .collect();
    digits.parse().ok().map(RequestId::Num)
}
