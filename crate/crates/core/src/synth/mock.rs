//! A scripted OpenAI-compatible server for end-to-end tests.
//!
//! Script file (JSON, every field optional):
//!
//! ```json
//! {
//!   "responses": {"prompt text": "response text"},
//!   "models": {"model-a": {"responses": {"prompt": "text"}, "fail_status": 500}},
//!   "fallback": "echo",
//!   "embedding_dim": 8,
//!   "dim_switch": {"after": 3, "dim": 16},
//!   "latency_ms": 0,
//!   "faults": [500, 429]
//! }
//! ```
//!
//! `faults` lists status codes returned for the first requests, in arrival
//! order, before normal service resumes. `fallback` is `"echo"`,
//! `{"fixed": "text"}` or `"not_found"`. Embeddings are Gaussian vectors
//! seeded by a hash of the input text and scaled by `1/sqrt(dim)`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    Echo,
    Fixed(String),
    NotFound,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelScript {
    pub responses: BTreeMap<String, String>,
    /// Every generation request for this model fails with this status.
    pub fail_status: Option<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimSwitch {
    /// Number of embedding requests served at the original dimension.
    pub after: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockScript {
    pub responses: BTreeMap<String, String>,
    pub models: BTreeMap<String, ModelScript>,
    pub fallback: Fallback,
    pub embedding_dim: usize,
    pub dim_switch: Option<DimSwitch>,
    pub latency_ms: u64,
    pub faults: Vec<u16>,
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            responses: BTreeMap::new(),
            models: BTreeMap::new(),
            fallback: Fallback::Echo,
            embedding_dim: 8,
            dim_switch: None,
            latency_ms: 0,
            faults: Vec::new(),
        }
    }
}

impl MockScript {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let script: MockScript = serde_json::from_str(&text)?;
        if script.embedding_dim == 0 {
            return Err(Error::domain("embedding_dim must be positive"));
        }
        Ok(script)
    }

    fn response_for(&self, model: &str, prompt: &str) -> Option<String> {
        if let Some(text) = self.models.get(model).and_then(|m| m.responses.get(prompt)) {
            return Some(text.clone());
        }
        if let Some(text) = self.responses.get(prompt) {
            return Some(text.clone());
        }
        match &self.fallback {
            Fallback::Echo => Some(prompt.to_string()),
            Fallback::Fixed(t) => Some(t.clone()),
            Fallback::NotFound => None,
        }
    }
}

/// Deterministic embedding of `text`: `N(0, 1/dim)` entries seeded by the text.
pub fn mock_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut r = rng(derive_seed(0, text));
    let scale = 1.0 / (dim as f64).sqrt();
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            z * scale
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoggedRequest {
    pub path: String,
    pub model: Option<String>,
    pub status: u16,
}

struct State {
    script: MockScript,
    requests: AtomicUsize,
    embeddings: AtomicUsize,
    log: Mutex<Vec<LoggedRequest>>,
}

/// A running mock server; stops when dropped.
pub struct MockServer {
    server: Arc<Server>,
    state: Arc<State>,
    workers: Vec<JoinHandle<()>>,
    port: u16,
}

impl MockServer {
    pub fn port(&self) -> u16 {
        self.port
    }

    /// Base URL including the `/v1` prefix.
    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}/v1", self.port)
    }

    pub fn request_log(&self) -> Vec<LoggedRequest> {
        self.state.log.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.state.log.lock().unwrap().len()
    }

    /// Blocks until the server is shut down from elsewhere.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// Serves `script` on `127.0.0.1:port` (`0` picks a free port).
pub fn spawn_mock_endpoint(script: MockScript, port: u16) -> Result<MockServer> {
    let server = Server::http(("127.0.0.1", port))
        .map_err(|e| Error::domain(format!("cannot bind mock server on port {port}: {e}")))?;
    let port = server
        .server_addr()
        .to_ip()
        .map(|a| a.port())
        .ok_or_else(|| Error::domain("mock server has no IP address"))?;
    let server = Arc::new(server);
    let state = Arc::new(State {
        script,
        requests: AtomicUsize::new(0),
        embeddings: AtomicUsize::new(0),
        log: Mutex::new(Vec::new()),
    });
    let workers = (0..4)
        .map(|_| {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            std::thread::spawn(move || {
                while let Ok(req) = server.recv() {
                    handle(&state, req);
                }
            })
        })
        .collect();
    Ok(MockServer {
        server,
        state,
        workers,
        port,
    })
}

fn handle(state: &State, mut req: tiny_http::Request) {
    let path = req.url().split('?').next().unwrap_or_default().to_string();
    let mut body = String::new();
    let parsed: Value = match req.as_reader().read_to_string(&mut body) {
        Ok(_) => serde_json::from_str(&body).unwrap_or(Value::Null),
        Err(_) => Value::Null,
    };
    let model = parsed.get("model").and_then(Value::as_str).map(str::to_string);
    if state.script.latency_ms > 0 {
        std::thread::sleep(Duration::from_millis(state.script.latency_ms));
    }
    let n = state.requests.fetch_add(1, Ordering::SeqCst);
    let (status, reply) = match state.script.faults.get(n) {
        Some(&status) => (status, json!({"error": {"message": "injected fault"}})),
        None => serve(state, &path, model.as_deref(), &parsed),
    };
    state.log.lock().unwrap().push(LoggedRequest {
        path,
        model,
        status,
    });
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let resp = Response::from_string(reply.to_string())
        .with_status_code(status)
        .with_header(header);
    let _ = req.respond(resp);
}

fn error(status: u16, message: &str) -> (u16, Value) {
    (status, json!({"error": {"message": message}}))
}

fn serve(state: &State, path: &str, model: Option<&str>, body: &Value) -> (u16, Value) {
    let script = &state.script;
    let model = model.unwrap_or_default();
    match path.trim_end_matches('/') {
        "/v1/chat/completions" | "/v1/completions" => {
            if let Some(status) = script.models.get(model).and_then(|m| m.fail_status) {
                return error(status, "scripted model failure");
            }
            let chat = path.contains("chat");
            let prompt = if chat {
                body.get("messages")
                    .and_then(Value::as_array)
                    .and_then(|m| m.iter().rev().find(|x| x.get("role") == Some(&json!("user"))))
                    .and_then(|m| m.get("content"))
                    .and_then(Value::as_str)
            } else {
                body.get("prompt").and_then(Value::as_str)
            };
            let Some(prompt) = prompt else {
                return error(400, "missing prompt");
            };
            let Some(text) = script.response_for(model, prompt) else {
                return error(404, "no scripted response");
            };
            let choice = if chat {
                json!({"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"})
            } else {
                json!({"index": 0, "text": text, "finish_reason": "stop"})
            };
            (200, json!({"object": if chat { "chat.completion" } else { "text_completion" }, "model": model, "choices": [choice]}))
        }
        "/v1/embeddings" => {
            let Some(input) = body.get("input").and_then(Value::as_str) else {
                return error(400, "missing input");
            };
            let k = state.embeddings.fetch_add(1, Ordering::SeqCst);
            let dim = match script.dim_switch {
                Some(s) if k >= s.after => s.dim,
                _ => script.embedding_dim,
            };
            let v = mock_embedding(input, dim);
            (200, json!({"object": "list", "model": model, "data": [{"object": "embedding", "index": 0, "embedding": v}]}))
        }
        _ => error(404, "unknown route"),
    }
}
