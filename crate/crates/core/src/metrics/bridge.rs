//! Client for metrics served by an external process.
//!
//! One JSON document per line in each direction, strictly serial:
//!
//! ```text
//! → {"id":1,"op":"info"}
//! ← {"id":1,"ok":true,"info":{"name":"...","score_lo":0,"score_hi":100,"supports_gradient":true}}
//! → {"id":2,"op":"score","image":{"height":H,"width":W,"channels":3,"data":"<base64 f32 LE>"}}
//! ← {"id":2,"ok":true,"score":57.1}
//! → {"id":3,"op":"gradient","image":{...}}
//! ← {"id":3,"ok":true,"gradient":{"height":H,"width":W,"channels":3,"data":"..."}}
//! ← {"id":4,"ok":false,"error":"..."}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{GradientField, Metric, MetricDescriptor, MetricError, MetricKind};
use crate::imaging::{Field, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Base64 of little-endian f32 values, row-major, channel-interleaved.
    pub data: String,
}

pub fn encode_field(field: &Field) -> WireImage {
    let s = field.shape();
    let mut bytes = Vec::with_capacity(s.len() * 4);
    for &v in field.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    WireImage {
        height: s.height,
        width: s.width,
        channels: s.channels,
        data: STANDARD.encode(bytes),
    }
}

pub fn decode_field(wire: &WireImage) -> Result<Field, MetricError> {
    let bytes = STANDARD
        .decode(&wire.data)
        .map_err(|e| protocol(format!("bad base64 payload: {e}")))?;
    let shape = Shape::new(wire.height, wire.width, wire.channels);
    if bytes.len() != shape.len() * 4 {
        return Err(protocol(format!(
            "payload has {} bytes, shape {shape} needs {}",
            bytes.len(),
            shape.len() * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Field::new(shape, data)?)
}

#[derive(Debug, Serialize)]
struct Request<'a> {
    id: u64,
    op: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    image: Option<WireImage>,
}

#[derive(Debug, Deserialize)]
struct InfoPayload {
    name: String,
    score_lo: f64,
    score_hi: f64,
    supports_gradient: bool,
}

#[derive(Debug, Deserialize)]
struct Response {
    id: u64,
    ok: bool,
    #[serde(default)]
    info: Option<InfoPayload>,
    #[serde(default)]
    score: Option<f64>,
    #[serde(default)]
    gradient: Option<WireImage>,
    #[serde(default)]
    error: Option<String>,
}

fn transport(message: impl Into<String>) -> MetricError {
    MetricError::Bridge {
        message: message.into(),
        retryable: true,
    }
}

fn protocol(message: impl Into<String>) -> MetricError {
    MetricError::Bridge {
        message: message.into(),
        retryable: false,
    }
}

struct BridgeProcess {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

impl BridgeProcess {
    fn call(&mut self, op: &str, image: Option<WireImage>) -> Result<Response, MetricError> {
        self.next_id += 1;
        let id = self.next_id;
        let mut line = serde_json::to_string(&Request { id, op, image })
            .map_err(|e| protocol(format!("cannot encode request: {e}")))?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| transport(format!("write to bridge failed: {e}")))?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| transport(format!("read from bridge failed: {e}")))?;
        if n == 0 {
            let status = self.child.try_wait().ok().flatten();
            return Err(transport(format!(
                "bridge closed its output{}",
                status.map(|s| format!(" ({s})")).unwrap_or_default()
            )));
        }
        let resp: Response = serde_json::from_str(reply.trim_end())
            .map_err(|e| protocol(format!("malformed response: {e}")))?;
        if resp.id != id {
            return Err(protocol(format!("response id {} does not match request {id}", resp.id)));
        }
        if !resp.ok {
            return Err(protocol(resp.error.unwrap_or_else(|| "unspecified bridge failure".into())));
        }
        Ok(resp)
    }
}

impl Drop for BridgeProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A metric served by a bridge subprocess. Requests are serialised through a
/// mutex, so one handle has at most one request in flight.
pub struct ExternalMetric {
    descriptor: MetricDescriptor,
    command: String,
    process: Mutex<BridgeProcess>,
}

impl ExternalMetric {
    /// Starts `command` (whitespace-separated program and arguments, no shell)
    /// and queries its descriptor.
    pub fn spawn(command: &str) -> Result<Self, MetricError> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| MetricError::Spec {
            spec: command.to_string(),
            reason: "empty command line".into(),
        })?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| transport(format!("cannot start {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut process = BridgeProcess {
            child,
            stdin,
            stdout,
            next_id: 0,
        };
        let info = process
            .call("info", None)?
            .info
            .ok_or_else(|| protocol("info response without info payload"))?;
        if info.name.is_empty() || !(info.score_lo < info.score_hi) {
            return Err(protocol(format!(
                "invalid descriptor: name {:?}, range [{}, {}]",
                info.name, info.score_lo, info.score_hi
            )));
        }
        Ok(ExternalMetric {
            descriptor: MetricDescriptor {
                name: info.name,
                score_lo: info.score_lo,
                score_hi: info.score_hi,
                supports_gradient: info.supports_gradient,
                kind: MetricKind::External,
            },
            command: command.to_string(),
            process: Mutex::new(process),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn call(&self, op: &str, x: &Field) -> Result<Response, MetricError> {
        let mut process = self
            .process
            .lock()
            .map_err(|_| protocol("bridge handle poisoned by an earlier panic"))?;
        process.call(op, Some(encode_field(x)))
    }
}

impl Metric for ExternalMetric {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.descriptor
    }

    fn score(&self, x: &Field) -> Result<f64, MetricError> {
        let score = self
            .call("score", x)?
            .score
            .ok_or_else(|| protocol("score response without score"))?;
        if !score.is_finite() {
            return Err(protocol(format!("bridge returned non-finite score {score}")));
        }
        Ok(score)
    }

    fn gradient(&self, x: &Field) -> Result<GradientField, MetricError> {
        let wire = self
            .call("gradient", x)?
            .gradient
            .ok_or_else(|| protocol("gradient response without gradient"))?;
        let g = decode_field(&wire)?;
        if g.shape() != x.shape() {
            return Err(protocol(format!(
                "gradient shape {} does not match request {}",
                g.shape(),
                x.shape()
            )));
        }
        Ok(g)
    }
}
