//! Client for an OpenAI-style embeddings endpoint, with a per-text EMB1 cache.
//!
//! Wire protocol: `POST {base_url}/embeddings` with
//! `{"model": str, "input": [str]}`, answered by
//! `{"data": [{"index": int, "embedding": [float]}]}`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use embinv_core::generator::Corpus;
use embinv_core::tensor::DenseMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::emb1::{self, Emb1Matrix};
use crate::error::{PipelineError, Result};

pub const API_KEY_ENV: &str = "EMBINV_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total tries per batch, including the first.
    pub max_attempts: u32,
    /// Delay before retry `k` is `backoff_ms · 2^(k-1)`.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_ms: 200,
        }
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

pub struct EmbeddingServiceClient {
    base_url: String,
    model: String,
    api_key: Option<String>,
    pub max_in_flight: usize,
    /// Texts per request; keep at or below the service limit.
    pub batch_size: usize,
    pub retry: RetryPolicy,
    agent: ureq::Agent,
    requests: AtomicUsize,
}

impl fmt::Debug for EmbeddingServiceClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddingServiceClient")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("max_in_flight", &self.max_in_flight)
            .field("batch_size", &self.batch_size)
            .field("retry", &self.retry)
            .finish()
    }
}

impl EmbeddingServiceClient {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            max_in_flight: 8,
            batch_size: 64,
            retry: RetryPolicy::default(),
            agent,
            requests: AtomicUsize::new(0),
        }
    }

    /// Reads the key from [`API_KEY_ENV`]; a missing key is allowed for
    /// local services.
    pub fn from_env(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self::new(base_url, model, std::env::var(API_KEY_ENV).ok())
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// HTTP requests attempted so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn post_once(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, (bool, String)> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.post(format!("{}/embeddings", self.base_url));
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let body = EmbeddingRequest {
            model: &self.model,
            input: texts,
        };
        let mut resp = req.send_json(&body).map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let retryable = status == 429 || status >= 500;
            return Err((retryable, format!("HTTP {status}")));
        }
        let parsed: EmbeddingResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, format!("bad response body: {e}")))?;
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for d in parsed.data {
            match out.get_mut(d.index) {
                Some(slot @ None) => *slot = Some(d.embedding),
                _ => return Err((false, format!("bad or repeated index {}", d.index))),
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or((false, format!("missing index {i}"))))
            .collect()
    }

    /// Embeds one batch, retrying transport errors, 429 and 5xx.
    pub fn embed_batch(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, String> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.post_once(texts) {
                Ok(v) => return Ok(v),
                Err((retryable, msg)) => {
                    if !retryable || attempt >= self.retry.max_attempts.max(1) {
                        return Err(msg);
                    }
                    log::warn!("embedding request failed ({msg}), attempt {attempt}; retrying");
                    let delay = self.retry.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                    thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }
}

type BatchOutcome = std::result::Result<Vec<Vec<f32>>, String>;

/// One EMB1 file (1 × n, f32) per `(model, text)` pair.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(model: &str, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(model.as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.emb1"))
    }

    pub fn get(&self, model: &str, text: &str) -> Option<Vec<f32>> {
        let path = self.path(&Self::key(model, text));
        match emb1::read(&path) {
            Ok(Emb1Matrix::F32(m)) if m.rows() == 1 => Some(m.into_vec()),
            Ok(_) => {
                log::warn!("ignoring malformed cache entry {}", path.display());
                None
            }
            Err(_) => None,
        }
    }

    pub fn put(&self, model: &str, text: &str, embedding: &[f32]) -> Result<()> {
        let m = DenseMatrix::from_vec(1, embedding.len(), embedding.to_vec())?;
        let path = self.path(&Self::key(model, text));
        // Write then rename so a crash never leaves a torn entry.
        let tmp = path.with_extension("tmp");
        emb1::write_f32(&tmp, &m)?;
        fs::rename(&tmp, &path).map_err(|e| PipelineError::io(&path, e))
    }
}

/// Embeds every record in order. Cached texts are not sent; fresh results
/// are cached as soon as their batch returns, so a failed run keeps what it
/// fetched.
///
/// Values pass through f32 (the cache dtype) either way, so warm and cold
/// runs return identical matrices.
pub fn fetch_embeddings(
    client: &EmbeddingServiceClient,
    corpus: &Corpus,
    cache: Option<&EmbeddingCache>,
) -> Result<DenseMatrix<f64>> {
    let records = corpus.records();
    let mut rows: Vec<Option<Vec<f32>>> = records
        .iter()
        .map(|r| cache.and_then(|c| c.get(client.model(), &r.text)))
        .collect();
    let missing: Vec<usize> = (0..records.len()).filter(|&i| rows[i].is_none()).collect();
    let batches: Vec<&[usize]> = missing.chunks(client.batch_size.max(1)).collect();
    log::info!(
        "{} of {} texts cached; {} request batch(es) to send",
        records.len() - missing.len(),
        records.len(),
        batches.len()
    );

    let results: Mutex<Vec<Option<BatchOutcome>>> = Mutex::new(vec![None; batches.len()]);
    let next = AtomicUsize::new(0);
    let workers = client.max_in_flight.max(1).min(batches.len());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::SeqCst);
                let Some(batch) = batches.get(b) else { break };
                let texts: Vec<&str> = batch.iter().map(|&i| records[i].text.as_str()).collect();
                let outcome = client.embed_batch(&texts).map(|vs| {
                    vs.into_iter()
                        .map(|v| v.into_iter().map(|x| x as f32).collect::<Vec<f32>>())
                        .collect::<Vec<_>>()
                });
                if let (Ok(vs), Some(c)) = (&outcome, cache) {
                    for (text, v) in texts.iter().zip(vs) {
                        if let Err(e) = c.put(client.model(), text, v) {
                            log::warn!("cache write failed: {e}");
                        }
                    }
                }
                results.lock().unwrap()[b] = Some(outcome);
            });
        }
    });

    let mut failed_ids = Vec::new();
    let mut first_error = None;
    for (batch, outcome) in batches.iter().zip(results.into_inner().unwrap()) {
        match outcome.expect("every batch is processed") {
            Ok(vs) => {
                for (&i, v) in batch.iter().zip(vs) {
                    rows[i] = Some(v);
                }
            }
            Err(msg) => {
                failed_ids.extend(batch.iter().map(|&i| records[i].id.clone()));
                first_error.get_or_insert(msg);
            }
        }
    }
    if let Some(message) = first_error {
        return Err(PipelineError::Network {
            message,
            failed_ids,
        });
    }

    let rows: Vec<Vec<f32>> = rows.into_iter().map(|r| r.expect("filled")).collect();
    let dim = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(PipelineError::DimMismatch {
                what: format!("embedding of record `{}`", records[i].id),
                expected: dim,
                found: r.len(),
            });
        }
    }
    let data: Vec<f32> = rows.into_iter().flatten().collect();
    Ok(DenseMatrix::from_vec(records.len(), dim, data)?.cast())
}
