//! Newline-delimited framing for the stdio transport.

use std::io::{self, BufRead, Write};

use super::envelope::{DecodeError, RpcEnvelope};
use super::server::{McpServer, Session, TransportKind};

/// One frame: the canonical encoding followed by `\n`.
pub fn encode_frame(env: &RpcEnvelope) -> String {
    let mut line = env.encode();
    line.push('\n');
    line
}

/// Accumulates raw bytes and yields one decode result per complete line.
/// Blank lines are skipped; a trailing partial line waits for more input.
#[derive(Debug, Default)]
pub struct LineFramer {
    buf: Vec<u8>,
}

impl LineFramer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chunk: &[u8]) -> Vec<Result<RpcEnvelope, DecodeError>> {
        self.buf.extend_from_slice(chunk);
        let mut out = Vec::new();
        while let Some(pos) = self.buf.iter().position(|&b| b == b'\n') {
            let line: Vec<u8> = self.buf.drain(..=pos).collect();
            if let Some(r) = decode_line(&line[..line.len() - 1]) {
                out.push(r);
            }
        }
        out
    }

    /// Bytes held back waiting for a newline.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}

fn decode_line(raw: &[u8]) -> Option<Result<RpcEnvelope, DecodeError>> {
    let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
    if raw.iter().all(u8::is_ascii_whitespace) {
        return None;
    }
    Some(match std::str::from_utf8(raw) {
        Ok(text) => RpcEnvelope::decode(text),
        Err(_) => RpcEnvelope::decode("\u{fffd}"),
    })
}

/// Serve a single session over a line-oriented byte stream until EOF or
/// until the session is closed.
///
/// Undecodable lines are answered with an error response only when an id can
/// be recovered from them; otherwise they are logged and skipped.
pub fn serve_stdio<R: BufRead, W: Write>(server: &McpServer, mut reader: R, mut writer: W) -> io::Result<()> {
    let mut session = Session::new(TransportKind::Stdio);
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Ok(());
        }
        let body = line.strip_suffix(b"\n").unwrap_or(&line);
        let reply = match decode_line(body) {
            None => continue,
            Some(Ok(env)) => server.handle(&mut session, env),
            Some(Err(e)) if e.recovered_id.is_some() => Some(e.response()),
            Some(Err(e)) => {
                tracing::warn!(error = %e, "skipping undecodable line");
                None
            }
        };
        if let Some(reply) = reply {
            writer.write_all(encode_frame(&reply).as_bytes())?;
            writer.flush()?;
        }
        if session.state() == super::server::SessionState::Closed {
            return Ok(());
        }
    }
}
