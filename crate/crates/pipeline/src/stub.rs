//! Minimal local embeddings server speaking the same wire protocol as the
//! real service. Used by the tests and for offline runs of `embed`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default)]
pub struct StubConfig {
    /// Embedding width for texts without a fixture.
    pub dim: usize,
    /// Fixed vectors by text.
    pub fixtures: HashMap<String, Vec<f64>>,
    /// Answer the first `fail_first` requests with HTTP 503.
    pub fail_first: usize,
    /// If set, requests without `Authorization: Bearer <key>` get 401.
    pub required_key: Option<String>,
    /// Reject batches larger than this with 400.
    pub max_batch: Option<usize>,
}

/// Deterministic pseudo-embedding for texts without a fixture: the first
/// `dim` bytes of a SHA-256 chain, mapped to `[-1, 1)`.
pub fn hashed_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    let mut block = Sha256::digest(text.as_bytes());
    while out.len() < dim {
        out.extend(
            block
                .iter()
                .take(dim - out.len())
                .map(|&b| b as f64 / 128.0 - 1.0),
        );
        block = Sha256::digest(block);
    }
    out
}

#[derive(Deserialize)]
struct Request {
    model: String,
    input: Vec<String>,
}

struct Shared {
    config: StubConfig,
    requests: AtomicUsize,
    shutdown: AtomicBool,
}

pub struct StubServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds an ephemeral localhost port and starts serving.
    pub fn start(config: StubConfig) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            config,
            requests: AtomicUsize::new(0),
            shutdown: AtomicBool::new(false),
        });
        let s = Arc::clone(&shared);
        let handle = thread::spawn(move || {
            for stream in listener.incoming() {
                if s.shutdown.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(stream) = stream {
                    let s = Arc::clone(&s);
                    thread::spawn(move || {
                        let _ = serve_connection(stream, &s);
                    });
                }
            }
        });
        Ok(Self {
            addr,
            shared,
            handle: Some(handle),
        })
    }

    /// Base URL to hand to the client.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far, including rejected ones.
    pub fn request_count(&self) -> usize {
        self.shared.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve_connection(stream: TcpStream, shared: &Shared) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line)? == 0 {
            return Ok(());
        }
        let mut content_length = 0usize;
        let mut auth = None;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Ok(());
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                let value = value.trim();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => content_length = value.parse().unwrap_or(0),
                    "authorization" => auth = Some(value.to_string()),
                    _ => {}
                }
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body)?;
        let n = shared.requests.fetch_add(1, Ordering::SeqCst);
        let (status, payload) = respond(&request_line, auth.as_deref(), &body, n, &shared.config);
        let text = payload.to_string();
        let reason = match status {
            200 => "OK",
            400 => "Bad Request",
            401 => "Unauthorized",
            404 => "Not Found",
            _ => "Service Unavailable",
        };
        write!(
            writer,
            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{text}",
            text.len()
        )?;
        writer.flush()?;
    }
}

fn respond(
    request_line: &str,
    auth: Option<&str>,
    body: &[u8],
    n: usize,
    config: &StubConfig,
) -> (u16, serde_json::Value) {
    let mut parts = request_line.split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    if method != "POST" || !path.ends_with("/embeddings") {
        return (404, json!({"error": "not found"}));
    }
    if let Some(key) = &config.required_key {
        if auth != Some(format!("Bearer {key}").as_str()) {
            return (401, json!({"error": "bad key"}));
        }
    }
    if n < config.fail_first {
        return (503, json!({"error": "try later"}));
    }
    let req: Request = match serde_json::from_slice(body) {
        Ok(r) => r,
        Err(e) => return (400, json!({"error": e.to_string()})),
    };
    if config.max_batch.is_some_and(|m| req.input.len() > m) {
        return (400, json!({"error": "batch too large"}));
    }
    let data: Vec<_> = req
        .input
        .iter()
        .enumerate()
        .map(|(index, text)| {
            let embedding = config
                .fixtures
                .get(text)
                .cloned()
                .unwrap_or_else(|| hashed_embedding(text, config.dim));
            json!({"object": "embedding", "index": index, "embedding": embedding})
        })
        .collect();
    (200, json!({"object": "list", "model": req.model, "data": data}))
}
