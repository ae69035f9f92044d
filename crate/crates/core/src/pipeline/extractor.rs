use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::{
    ErrorResponse, FeaturesRequest, FeaturesResponse, HealthResponse, PairPayload, FEATURES_PATH, HEALTH_PATH,
};
use super::pair_digest;
use crate::error::{ContractError, ExtractError};
use crate::model::SentencePair;

/// Anything that can produce neural features for a batch of pairs.
pub trait FeatureExtractor: Sync {
    /// Largest batch a single call accepts.
    fn max_batch(&self) -> usize;

    /// Concurrent batches `extract_features` may keep in flight.
    fn max_in_flight(&self) -> usize {
        1
    }

    /// Version tag, when known without a round trip.
    fn extractor_version(&self) -> Option<String> {
        None
    }

    fn extract_batch(&self, pairs: &[SentencePair]) -> Result<FeaturesResponse, ExtractError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub max_batch: usize,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl ExtractorEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout: Duration::from_secs(60),
            max_batch: 32,
            max_in_flight: 2,
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        if self.max_batch == 0 || self.max_in_flight == 0 {
            return Err(ContractError::InvalidConfig(
                "max_batch and max_in_flight must be at least 1".into(),
            ));
        }
        if self.retry.attempts == 0 {
            return Err(ContractError::InvalidConfig("retry attempts must be at least 1".into()));
        }
        if !self.base_url.starts_with("http://") {
            return Err(ContractError::InvalidConfig(format!(
                "endpoint must be an http:// URL, got {}",
                self.base_url
            )));
        }
        Ok(())
    }
}

/// Client for the remote feature service.
pub struct HttpExtractor {
    endpoint: ExtractorEndpoint,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(String),
    Fatal(ExtractError),
}

impl HttpExtractor {
    pub fn new(endpoint: ExtractorEndpoint) -> Result<Self, ContractError> {
        endpoint.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { endpoint, agent })
    }

    pub fn endpoint(&self) -> &ExtractorEndpoint {
        &self.endpoint
    }

    pub fn health(&self) -> Result<HealthResponse, ExtractError> {
        let url = format!("{}{HEALTH_PATH}", self.endpoint.base_url);
        let mut resp = self.agent.get(&url).call().map_err(|e| ExtractError::Transport {
            attempts: 1,
            message: e.to_string(),
            unfetched: Vec::new(),
        })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(ExtractError::Protocol(format!("health check returned HTTP {status}")));
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| ExtractError::Protocol(format!("health body: {e}")))
    }

    fn attempt(&self, request: &FeaturesRequest) -> Result<FeaturesResponse, Attempt> {
        let url = format!("{}{FEATURES_PATH}", self.endpoint.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(request)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match resp.status().as_u16() {
            200 => resp
                .body_mut()
                .read_json::<FeaturesResponse>()
                .map_err(|e| Attempt::Fatal(ExtractError::Protocol(format!("malformed response: {e}")))),
            422 => {
                let detail = match resp.body_mut().read_json::<ErrorResponse>() {
                    Ok(body) => body
                        .errors
                        .iter()
                        .map(|e| format!("item {}: {}", e.index, e.message))
                        .collect::<Vec<_>>()
                        .join("; "),
                    Err(e) => format!("unreadable error body: {e}"),
                };
                Err(Attempt::Fatal(ExtractError::Protocol(format!("rejected request: {detail}"))))
            }
            s if s >= 500 => Err(Attempt::Retry(format!("HTTP {s}"))),
            s => Err(Attempt::Fatal(ExtractError::Protocol(format!("unexpected HTTP {s}")))),
        }
    }
}

impl FeatureExtractor for HttpExtractor {
    fn max_batch(&self) -> usize {
        self.endpoint.max_batch
    }

    fn max_in_flight(&self) -> usize {
        self.endpoint.max_in_flight
    }

    fn extract_batch(&self, pairs: &[SentencePair]) -> Result<FeaturesResponse, ExtractError> {
        let request = FeaturesRequest {
            pairs: pairs.iter().map(PairPayload::from).collect(),
        };
        let policy = self.endpoint.retry;
        let mut last = String::new();
        for attempt in 0..policy.attempts {
            if attempt > 0 {
                std::thread::sleep(policy.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&request) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(ExtractError::Transport {
            attempts: policy.attempts,
            message: last,
            unfetched: pairs.iter().map(pair_digest).collect(),
        })
    }
}
