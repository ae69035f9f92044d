//! A deterministic stand-in for the neural feature service.
//!
//! [`StubExtractor`] derives every feature from token overlap so that runs
//! are reproducible without model checkpoints; [`StubServer`] exposes any
//! [`FeatureExtractor`] over the HTTP wire protocol.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use sha2::{Digest, Sha256};
use tiny_http::{Header, Method, Response, Server};

use super::extractor::FeatureExtractor;
use super::protocol::{
    ErrorResponse, FeaturesRequest, FeaturesResponse, HealthResponse, ItemError, NeuralFeatures, FEATURES_PATH,
    HEALTH_PATH,
};
use crate::baseline::tokenize;
use crate::error::ExtractError;
use crate::model::SentencePair;

pub const STUB_EXTRACTOR_VERSION: &str = "stub-overlap-v1";

/// Clipped unigram F1 between two texts under the canonical tokenizer;
/// 1 when both are empty.
pub fn token_overlap(reference: &str, candidate: &str) -> f64 {
    let r = tokenize(reference);
    let c = tokenize(candidate);
    if r.is_empty() && c.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in r.tokens() {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in c.tokens() {
        if let Some(n) = counts.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                common += 1;
            }
        }
    }
    (2 * common) as f64 / (r.len() + c.len()) as f64
}

/// Pseudo-perplexity in [2, 52), a pure function of the text.
pub fn stub_perplexity(text: &str) -> f64 {
    let h = Sha256::digest(text.trim().as_bytes());
    let v = u16::from_be_bytes([h[0], h[1]]) % 500;
    2.0 + f64::from(v) / 10.0
}

/// Features of one pair: with overlap `o`, sem_sim = 5·o and the MNLI
/// distribution moves from contradiction toward entailment as `o` grows.
pub fn stub_features(reference: &str, candidate: &str) -> NeuralFeatures {
    let o = token_overlap(reference, candidate);
    NeuralFeatures {
        sem_sim: 5.0 * o,
        mnli: [0.05 + 0.45 * (1.0 - o), 0.45 * (1.0 - o), 0.05 + 0.9 * o],
        ppl_ref: stub_perplexity(reference),
        ppl_cand: stub_perplexity(candidate),
    }
}

/// In-process extractor computing [`stub_features`]. Records the size of
/// every batch it serves.
#[derive(Debug)]
pub struct StubExtractor {
    version: String,
    max_batch: usize,
    batches: Mutex<Vec<usize>>,
    fail_first: AtomicUsize,
}

impl Default for StubExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl StubExtractor {
    pub fn new() -> Self {
        Self {
            version: STUB_EXTRACTOR_VERSION.to_string(),
            max_batch: 64,
            batches: Mutex::new(Vec::new()),
            fail_first: AtomicUsize::new(0),
        }
    }

    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = max_batch;
        self
    }

    pub fn with_version(mut self, version: impl Into<String>) -> Self {
        self.version = version.into();
        self
    }

    /// The next `n` calls fail with a transport error.
    pub fn failing_first(self, n: usize) -> Self {
        self.fail_first.store(n, Ordering::SeqCst);
        self
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.batches.lock().expect("stub lock").clone()
    }

    /// Total pairs served.
    pub fn pairs_served(&self) -> usize {
        self.batch_sizes().iter().sum()
    }
}

impl FeatureExtractor for StubExtractor {
    fn max_batch(&self) -> usize {
        self.max_batch
    }

    fn extractor_version(&self) -> Option<String> {
        Some(self.version.clone())
    }

    fn extract_batch(&self, pairs: &[SentencePair]) -> Result<FeaturesResponse, ExtractError> {
        let failing = self
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if failing {
            return Err(ExtractError::Transport {
                attempts: 1,
                message: "injected failure".into(),
                unfetched: pairs.iter().map(super::pair_digest).collect(),
            });
        }
        self.batches.lock().expect("stub lock").push(pairs.len());
        Ok(FeaturesResponse {
            features: pairs.iter().map(|p| stub_features(p.reference(), p.candidate())).collect(),
            extractor_version: self.version.clone(),
        })
    }
}

/// Background HTTP server speaking the feature protocol on 127.0.0.1.
/// Stops when dropped.
pub struct StubServer {
    server: Arc<Server>,
    addr: SocketAddr,
    thread: Option<JoinHandle<()>>,
    requests: Arc<AtomicUsize>,
}

impl StubServer {
    /// Serves `extractor` on an ephemeral port.
    pub fn start<E>(extractor: Arc<E>) -> std::io::Result<Self>
    where
        E: FeatureExtractor + Send + 'static,
    {
        Self::start_with(extractor, 0, 0)
    }

    /// Like [`StubServer::start`], but answers the first `unavailable`
    /// feature requests with HTTP 503.
    pub fn start_with<E>(extractor: Arc<E>, port: u16, unavailable: usize) -> std::io::Result<Self>
    where
        E: FeatureExtractor + Send + 'static,
    {
        let server = Server::http(("127.0.0.1", port)).map_err(std::io::Error::other)?;
        let server = Arc::new(server);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let requests = Arc::new(AtomicUsize::new(0));
        let thread = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || {
                let version = extractor.extractor_version().unwrap_or_default();
                for mut request in server.incoming_requests() {
                    let n = requests.fetch_add(1, Ordering::SeqCst);
                    let (status, body) = route(&mut request, extractor.as_ref(), &version, n < unavailable);
                    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
                    let _ = request.respond(Response::from_string(body).with_status_code(status).with_header(header));
                }
            })
        };
        Ok(Self {
            server,
            addr,
            thread: Some(thread),
            requests,
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests_served(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Blocks until the server thread exits (it never does on its own).
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("response serializes")
}

fn route(
    request: &mut tiny_http::Request,
    extractor: &dyn FeatureExtractor,
    version: &str,
    unavailable: bool,
) -> (u16, String) {
    match (request.method(), request.url()) {
        (Method::Get, HEALTH_PATH) => (
            200,
            json(&HealthResponse {
                status: "ready".into(),
                extractor_version: version.to_string(),
            }),
        ),
        (Method::Post, FEATURES_PATH) => {
            if unavailable {
                return (503, r#"{"status":"loading"}"#.into());
            }
            let mut body = String::new();
            if let Err(e) = request.as_reader().read_to_string(&mut body) {
                return (400, json(&serde_json::json!({ "error": e.to_string() })));
            }
            let parsed: FeaturesRequest = match serde_json::from_str(&body) {
                Ok(r) => r,
                Err(e) => return (400, json(&serde_json::json!({ "error": e.to_string() }))),
            };
            let mut errors = Vec::new();
            let mut pairs = Vec::new();
            if parsed.pairs.is_empty() || parsed.pairs.len() > extractor.max_batch() {
                errors.push(ItemError {
                    index: 0,
                    message: format!("batch size must be between 1 and {}", extractor.max_batch()),
                });
            }
            for (index, p) in parsed.pairs.into_iter().enumerate() {
                match SentencePair::new(p.reference, p.candidate) {
                    Ok(pair) => pairs.push(pair),
                    Err(e) => errors.push(ItemError {
                        index,
                        message: e.to_string(),
                    }),
                }
            }
            if !errors.is_empty() {
                return (422, json(&ErrorResponse { errors }));
            }
            match extractor.extract_batch(&pairs) {
                Ok(resp) => (200, json(&resp)),
                Err(e) => (503, json(&serde_json::json!({ "error": e.to_string() }))),
            }
        }
        _ => (404, r#"{"error":"not found"}"#.into()),
    }
}
