use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::extractor::FeatureExtractor;
use super::{acquire, extract_features, pair_digest, FeatureStore};
use crate::aggregator::{predict_raw, TrainedAggregator};
use crate::error::{Error, ExtractError};
use crate::model::SentencePair;

/// Self-scores at or below this skip normalization.
pub const SELF_SCORE_EPSILON: f64 = 1e-6;

/// Which text is paired with itself to produce the calibration denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfReference {
    #[default]
    Reference,
    Candidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrated {
    pub score: f64,
    pub normalized: bool,
}

/// Divides by the self-score when it exceeds [`SELF_SCORE_EPSILON`], then
/// clamps to [0, 1].
pub fn calibrate(raw: f64, self_score: f64) -> Calibrated {
    if self_score > SELF_SCORE_EPSILON {
        Calibrated {
            score: (raw / self_score).clamp(0.0, 1.0),
            normalized: true,
        }
    } else {
        Calibrated {
            score: raw.clamp(0.0, 1.0),
            normalized: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    /// Calibrated score in [0, 1].
    pub score: f64,
    pub raw: f64,
    pub self_score: f64,
    pub normalized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl ScoreResult {
    fn new(raw: f64, self_score: f64) -> Self {
        let c = calibrate(raw, self_score);
        Self {
            score: c.score,
            raw,
            self_score,
            normalized: c.normalized,
            warning: (!c.normalized).then(|| {
                format!("self-score {self_score} <= {SELF_SCORE_EPSILON}; normalization skipped")
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairError {
    pub index: usize,
    pub message: String,
}

/// Per-pair outcomes of [`Scorer::score_batch`].
#[derive(Debug)]
pub struct BatchScores {
    pub results: Vec<Option<ScoreResult>>,
    pub errors: Vec<PairError>,
    /// The error that caused the first failure, if any.
    pub failure: Option<Error>,
}

impl BatchScores {
    pub fn into_complete(self) -> Result<Vec<ScoreResult>, Error> {
        if let Some(e) = self.failure {
            return Err(e);
        }
        Ok(self.results.into_iter().map(|r| r.expect("no errors recorded")).collect())
    }
}

/// End-to-end scorer: features, regressor, self-normalization and clamping.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    pub model: &'a TrainedAggregator,
    pub extractor: Option<&'a dyn FeatureExtractor>,
    pub self_reference: SelfReference,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a TrainedAggregator, extractor: Option<&'a dyn FeatureExtractor>) -> Self {
        Self {
            model,
            extractor,
            self_reference: SelfReference::Reference,
        }
    }

    pub fn with_self_reference(mut self, mode: SelfReference) -> Self {
        self.self_reference = mode;
        self
    }

    fn self_pair(&self, pair: &SentencePair) -> SentencePair {
        let text = match self.self_reference {
            SelfReference::Reference => pair.reference(),
            SelfReference::Candidate => pair.candidate(),
        };
        SentencePair::identity(text).expect("texts of a valid pair are nonempty")
    }

    pub fn score(&self, pair: &SentencePair, cache: &mut FeatureStore) -> Result<ScoreResult, Error> {
        let records = extract_features(&[pair.clone(), self.self_pair(pair)], self.extractor, cache)?;
        let raw = predict_raw(self.model, &records[0].features)?;
        let self_score = predict_raw(self.model, &records[1].features)?;
        Ok(ScoreResult::new(raw, self_score))
    }

    /// Scores every pair; self-features are fetched once per distinct self
    /// text. Failures are reported per pair instead of aborting the batch.
    pub fn score_batch(&self, pairs: &[SentencePair], cache: &mut FeatureStore) -> Result<BatchScores, ExtractError> {
        let self_pairs: Vec<SentencePair> = pairs.iter().map(|p| self.self_pair(p)).collect();
        let mut needed: Vec<SentencePair> = pairs.to_vec();
        let mut seen = HashSet::new();
        needed.extend(self_pairs.iter().filter(|p| seen.insert(pair_digest(p))).cloned());

        let acq = acquire(&needed, self.extractor, cache)?;
        let mut why: HashMap<String, String> = HashMap::new();
        for f in &acq.failures {
            for d in &f.digests {
                why.insert(d.clone(), f.error.to_string());
            }
        }
        let mut failure: Option<Error> = acq.into_result().err().map(Error::from);

        let mut self_scores: HashMap<String, Result<f64, String>> = HashMap::new();
        let mut results = Vec::with_capacity(pairs.len());
        let mut errors = Vec::new();
        for (index, (pair, sp)) in pairs.iter().zip(&self_pairs).enumerate() {
            let lookup = |p: &SentencePair| -> Result<f64, Error> {
                let d = pair_digest(p);
                let rec = cache.get(&d).ok_or_else(|| {
                    Error::Extract(ExtractError::CacheMiss(vec![d.clone()]))
                })?;
                Ok(predict_raw(self.model, &rec.features)?)
            };
            let self_digest = pair_digest(sp);
            let self_score = self_scores
                .entry(self_digest.clone())
                .or_insert_with(|| lookup(sp).map_err(|e| why.get(&self_digest).cloned().unwrap_or(e.to_string())))
                .clone();
            let outcome = self_score.map_err(|m| (m, None)).and_then(|s| {
                lookup(pair)
                    .map(|raw| ScoreResult::new(raw, s))
                    .map_err(|e| (why.get(&pair_digest(pair)).cloned().unwrap_or(e.to_string()), Some(e)))
            });
            match outcome {
                Ok(r) => results.push(Some(r)),
                Err((message, err)) => {
                    if failure.is_none() {
                        failure = Some(err.unwrap_or_else(|| Error::Extract(ExtractError::Protocol(message.clone()))));
                    }
                    errors.push(PairError { index, message });
                    results.push(None);
                }
            }
        }
        Ok(BatchScores { results, errors, failure })
    }

    /// Multi-reference scoring: the best score against any reference.
    pub fn score_multi_reference(
        &self,
        references: &[String],
        candidate: &str,
        cache: &mut FeatureStore,
    ) -> Result<ScoreResult, Error> {
        let pairs = references
            .iter()
            .map(|r| SentencePair::new(r.clone(), candidate))
            .collect::<Result<Vec<_>, _>>()?;
        if pairs.is_empty() {
            return Err(Error::Usage("at least one reference is required".into()));
        }
        let scores = self.score_batch(&pairs, cache)?.into_complete()?;
        Ok(scores
            .into_iter()
            .max_by(|a, b| a.score.total_cmp(&b.score))
            .expect("nonempty"))
    }
}

/// Calibrated score of one pair with reference self-normalization.
pub fn nubia_score(
    model: &TrainedAggregator,
    pair: &SentencePair,
    extractor: Option<&dyn FeatureExtractor>,
    cache: &mut FeatureStore,
) -> Result<ScoreResult, Error> {
    Scorer::new(model, extractor).score(pair, cache)
}

pub fn score_batch(
    model: &TrainedAggregator,
    pairs: &[SentencePair],
    extractor: Option<&dyn FeatureExtractor>,
    cache: &mut FeatureStore,
) -> Result<BatchScores, ExtractError> {
    Scorer::new(model, extractor).score_batch(pairs, cache)
}
