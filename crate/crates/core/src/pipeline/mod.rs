//! Feature acquisition (remote extractor behind a content-addressed cache),
//! calibration, end-to-end scoring and the feature-ablation driver.

mod ablation;
mod cache;
mod extractor;
pub mod protocol;
mod scoring;
pub mod stub;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

pub use ablation::{run_ablation, AblationDataset, AblationRow, FeaturedItem};
pub use cache::{CacheHeader, FeatureStore, CACHE_FORMAT_VERSION};
pub use extractor::{ExtractorEndpoint, FeatureExtractor, HttpExtractor, RetryPolicy};
pub use scoring::{
    calibrate, nubia_score, score_batch, BatchScores, Calibrated, PairError, ScoreResult, Scorer, SelfReference,
    SELF_SCORE_EPSILON,
};

pub use crate::baseline::count_words;
use crate::error::ExtractError;
use crate::model::{FeatureVector, SentencePair};

/// Documented in every cache header.
pub const PAIR_DIGEST_SCHEME: &str = "sha256(nfc(trim(reference)) || 0x00 || nfc(trim(candidate)))";

/// Content hash over NFC-normalized, whitespace-trimmed texts, lowercase hex.
pub fn pair_digest(pair: &SentencePair) -> String {
    let mut h = Sha256::new();
    h.update(pair.reference().trim().nfc().collect::<String>().as_bytes());
    h.update([0u8]);
    h.update(pair.candidate().trim().nfc().collect::<String>().as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub pair_digest: String,
    pub pair: SentencePair,
    pub features: FeatureVector,
    pub extractor_version: String,
}

/// Distinct pairs that could not be fetched and why.
#[derive(Debug)]
pub struct BatchFailure {
    pub digests: Vec<String>,
    pub error: ExtractError,
}

/// Outcome of [`acquire`]: counts are over distinct digests.
#[derive(Debug, Default)]
pub struct Acquisition {
    pub cached: usize,
    pub fetched: usize,
    pub failures: Vec<BatchFailure>,
}

impl Acquisition {
    pub fn unfetched(&self) -> Vec<String> {
        self.failures.iter().flat_map(|f| f.digests.iter().cloned()).collect()
    }

    /// Collapses failures into one error: cache misses and transport
    /// failures list every unfetched digest; otherwise the first error wins.
    pub fn into_result(self) -> Result<(), ExtractError> {
        if self.failures.is_empty() {
            return Ok(());
        }
        let unfetched = self.unfetched();
        let mut failures = self.failures.into_iter();
        let first = failures.next().expect("nonempty");
        match first.error {
            ExtractError::CacheMiss(_) => Err(ExtractError::CacheMiss(unfetched)),
            ExtractError::Transport { attempts, message, .. }
                if failures.all(|f| matches!(f.error, ExtractError::Transport { .. })) =>
            {
                Err(ExtractError::Transport {
                    attempts,
                    message,
                    unfetched,
                })
            }
            other => Err(other),
        }
    }
}

fn records_from_response(
    batch: &[SentencePair],
    response: protocol::FeaturesResponse,
) -> Result<Vec<FeatureRecord>, ExtractError> {
    if response.features.len() != batch.len() {
        return Err(ExtractError::Protocol(format!(
            "sent {} pairs, received {} feature rows",
            batch.len(),
            response.features.len()
        )));
    }
    batch
        .iter()
        .zip(response.features)
        .map(|(pair, nf)| {
            let features = nf.with_lengths(pair);
            let digest = pair_digest(pair);
            let violations = features.validate();
            if !violations.is_empty() {
                return Err(ExtractError::InvalidFeatures { digest, violations });
            }
            Ok(FeatureRecord {
                pair_digest: digest,
                pair: pair.clone(),
                features,
                extractor_version: response.extractor_version.clone(),
            })
        })
        .collect()
}

/// Cache-first acquisition: distinct misses are sent to `extractor` in
/// batches of at most `max_batch`, up to `max_in_flight` at a time, and every
/// valid result is persisted. With no extractor, misses are reported as
/// cache misses. Only cache I/O errors abort early.
pub fn acquire(
    pairs: &[SentencePair],
    extractor: Option<&dyn FeatureExtractor>,
    cache: &mut FeatureStore,
) -> Result<Acquisition, ExtractError> {
    let mut seen = HashSet::new();
    let mut misses: Vec<&SentencePair> = Vec::new();
    let mut acq = Acquisition::default();
    for pair in pairs {
        let d = pair_digest(pair);
        if !seen.insert(d.clone()) {
            continue;
        }
        if cache.contains(&d) {
            acq.cached += 1;
        } else {
            misses.push(pair);
        }
    }
    if misses.is_empty() {
        return Ok(acq);
    }
    let Some(extractor) = extractor else {
        let digests: Vec<String> = misses.iter().map(|p| pair_digest(p)).collect();
        acq.failures.push(BatchFailure {
            error: ExtractError::CacheMiss(digests.clone()),
            digests,
        });
        return Ok(acq);
    };

    let batches: Vec<Vec<SentencePair>> = misses
        .chunks(extractor.max_batch().max(1))
        .map(|c| c.iter().map(|p| (*p).clone()).collect())
        .collect();
    for wave in batches.chunks(extractor.max_in_flight().max(1)) {
        let results: Vec<Result<Vec<FeatureRecord>, ExtractError>> = std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|batch| {
                    s.spawn(move || {
                        extractor
                            .extract_batch(batch)
                            .and_then(|resp| records_from_response(batch, resp))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("extractor thread panicked"))
                .collect()
        });
        // single writer: results are persisted here, in batch order
        for (batch, result) in wave.iter().zip(results) {
            let digests = || batch.iter().map(pair_digest).collect::<Vec<_>>();
            match result {
                Ok(records) => {
                    for rec in records {
                        match cache.insert(rec) {
                            Ok(()) => acq.fetched += 1,
                            Err(e @ ExtractError::Io(_)) => return Err(e),
                            Err(error) => {
                                acq.failures.push(BatchFailure { digests: digests(), error });
                                break;
                            }
                        }
                    }
                }
                Err(error) => acq.failures.push(BatchFailure { digests: digests(), error }),
            }
        }
    }
    Ok(acq)
}

/// Records for `pairs` in input order, fetching misses first.
pub fn extract_features(
    pairs: &[SentencePair],
    extractor: Option<&dyn FeatureExtractor>,
    cache: &mut FeatureStore,
) -> Result<Vec<FeatureRecord>, ExtractError> {
    acquire(pairs, extractor, cache)?.into_result()?;
    Ok(pairs
        .iter()
        .map(|p| cache.get(&pair_digest(p)).expect("acquired").clone())
        .collect())
}

/// Features of (reference, reference).
pub fn self_features(
    reference: &str,
    extractor: Option<&dyn FeatureExtractor>,
    cache: &mut FeatureStore,
) -> Result<FeatureVector, crate::error::Error> {
    let pair = SentencePair::identity(reference)?;
    Ok(extract_features(std::slice::from_ref(&pair), extractor, cache)?[0].features)
}
