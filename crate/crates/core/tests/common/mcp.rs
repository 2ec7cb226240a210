//! MCP fixtures: test servers, transport harnesses and the shared
//! conformance checks.

use std::io::{BufReader, Cursor};
use std::sync::Arc;
use std::thread;

use mada::mcp::{
    call_http, codes, encode_frame, serve_stdio, ClientError, McpClient, McpServer, InputSchema, ParamType,
    RequestId, RpcEnvelope, StdioTransport, PROTOCOL_VERSION,
};
use mada::scheduler::{scheduler_server, Scheduler, SchedulerConfig};
use serde_json::{json, Value};

pub fn echo_server() -> McpServer {
    let mut s = McpServer::new("echo-test");
    s.register(
        "echo",
        "return the arguments",
        InputSchema::new()
            .required("text", ParamType::String, "")
            .optional("n", ParamType::Number, ""),
        |a| Ok(a.clone()),
    )
    .unwrap();
    s.register("fail", "always fails", InputSchema::new(), |_| Err("boom".into()))
        .unwrap();
    s
}

pub fn sched_server() -> McpServer {
    scheduler_server(Scheduler::new(SchedulerConfig::new(4, 8)))
}

/// A client whose server runs `serve_stdio` on a thread behind OS pipes.
pub fn stdio_client(server: Arc<McpServer>) -> (McpClient, thread::JoinHandle<()>) {
    let (c2s_r, c2s_w) = std::io::pipe().unwrap();
    let (s2c_r, s2c_w) = std::io::pipe().unwrap();
    let h = thread::spawn(move || {
        serve_stdio(&server, BufReader::new(c2s_r), s2c_w).unwrap();
    });
    (McpClient::new(StdioTransport::new(BufReader::new(s2c_r), c2s_w)), h)
}

pub fn rpc_code(r: Result<Value, ClientError>) -> i64 {
    r.unwrap_err().rpc_code().expect("json-rpc error")
}

pub fn handshake_suite(c: &mut McpClient) {
    assert_eq!(rpc_code(c.request("tools/list", json!({}))), codes::NOT_INITIALIZED);
    let caps = c.initialize("suite").unwrap();
    assert!(caps.tools);
    assert_eq!(caps.protocol_version, PROTOCOL_VERSION);
    let err = c.initialize("again").unwrap_err();
    assert_eq!(err.rpc_code(), Some(codes::DOUBLE_INITIALIZE));
    let names: Vec<String> = c.list_tools().unwrap().into_iter().map(|t| t.name).collect();
    assert_eq!(
        names,
        ["submit_job", "submit_jobs_async", "check_job_status", "execute_generated_runs", "cancel_job"]
    );
    let status = c.call_tool("check_job_status", json!({})).unwrap();
    assert_eq!(status["count"], 0);
    assert_eq!(
        rpc_code(c.request("tools/call", json!({"name": "no_such_tool", "arguments": {}}))),
        codes::METHOD_NOT_FOUND
    );
    assert_eq!(
        rpc_code(c.request("tools/call", json!({"name": "submit_job", "arguments": {"nodes": "two"}}))),
        codes::INVALID_PARAMS
    );
    assert_eq!(rpc_code(c.request("no/such/method", json!({}))), codes::METHOD_NOT_FOUND);
    c.close().unwrap();
}

/// Feeds one of each malformed input through `serve_stdio` and checks the
/// reserved code on every reply.
pub fn reserved_codes_over_stdio() {
    let server = echo_server();
    let lines = [
        format!(r#"{{"jsonrpc":"2.0","id":1,"method":"initialize","params":{{"protocol_version":"{PROTOCOL_VERSION}"}}}}"#),
        "not json".to_string(),
        r#"{"jsonrpc":"2.0","id":2,"method":"tools/list""#.to_string(),
        r#"{"jsonrpc":"1.0","id":3,"method":"tools/list"}"#.to_string(),
        r#"{"jsonrpc":"2.0","id":4,"method":"tools/call","params":{"name":"nope"}}"#.to_string(),
        r#"{"jsonrpc":"2.0","id":5,"method":"tools/call","params":{"name":"echo","arguments":{"text":5}}}"#.to_string(),
        r#"{"jsonrpc":"2.0","method":"notifications/initialized"}"#.to_string(),
        r#"{"jsonrpc":"2.0","id":"six","method":"tools/call","params":{"name":"echo","arguments":{"text":"hi"}}}"#
            .to_string(),
    ];
    let input = lines.join("\n") + "\n";
    let mut out = Vec::new();
    serve_stdio(&server, Cursor::new(input.into_bytes()), &mut out).unwrap();
    let replies: Vec<RpcEnvelope> = String::from_utf8(out)
        .unwrap()
        .lines()
        .map(|l| RpcEnvelope::decode(l).unwrap())
        .collect();
    // "not json" has no id to answer and the notification gets no reply.
    assert_eq!(replies.len(), 6);
    let code = |env: &RpcEnvelope| match env {
        RpcEnvelope::Response { outcome: Err(e), .. } => Some(e.code),
        _ => None,
    };
    let ids: Vec<Option<RequestId>> = replies.iter().map(|r| r.id().cloned()).collect();
    assert_eq!(
        ids,
        vec![
            Some(RequestId::Num(1)),
            Some(RequestId::Num(2)),
            Some(RequestId::Num(3)),
            Some(RequestId::Num(4)),
            Some(RequestId::Num(5)),
            Some(RequestId::Str("six".into())),
        ]
    );
    assert_eq!(code(&replies[0]), None);
    assert_eq!(code(&replies[1]), Some(codes::PARSE_ERROR));
    assert_eq!(code(&replies[2]), Some(codes::INVALID_REQUEST));
    assert_eq!(code(&replies[3]), Some(codes::METHOD_NOT_FOUND));
    assert_eq!(code(&replies[4]), Some(codes::INVALID_PARAMS));
    let RpcEnvelope::Response { outcome: Ok(v), .. } = &replies[5] else { panic!() };
    assert_eq!(v["content"], json!({"text": "hi"}));
}

/// Encoded reply lines for a scripted session over stdio.
pub fn stdio_bytes(server: &McpServer, requests: &[RpcEnvelope]) -> Vec<String> {
    let input: String = requests.iter().map(encode_frame).collect();
    let mut out = Vec::new();
    serve_stdio(server, Cursor::new(input.into_bytes()), &mut out).unwrap();
    String::from_utf8(out).unwrap().lines().map(str::to_string).collect()
}

pub fn http_bytes(url: &str, requests: &[RpcEnvelope]) -> Vec<String> {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut session = None;
    let mut out = Vec::new();
    for r in requests {
        let (reply, issued) = call_http(&agent, url, session.as_deref(), r).unwrap();
        if issued.is_some() {
            session = issued;
        }
        if let Some(reply) = reply {
            out.push(reply.encode());
        }
    }
    out
}
