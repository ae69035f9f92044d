//! Wire types of the feature-extraction service.
//!
//! ```text
//! POST /v1/features  {"pairs":[{"reference":..,"candidate":..}]}
//!   200 -> {"features":[{"sem_sim":..,"mnli":[c,n,e],"ppl_ref":..,"ppl_cand":..}],
//!           "extractor_version":".."}
//!   422 -> {"errors":[{"index":0,"message":".."}]}
//!   503 while models are loading
//! GET  /v1/health    -> {"status":"ready","extractor_version":".."}
//! ```

use serde::{Deserialize, Serialize};

use crate::baseline::count_words;
use crate::model::{FeatureVector, SentencePair};

pub const FEATURES_PATH: &str = "/v1/features";
pub const HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPayload {
    pub reference: String,
    pub candidate: String,
}

impl From<&SentencePair> for PairPayload {
    fn from(p: &SentencePair) -> Self {
        Self {
            reference: p.reference().to_string(),
            candidate: p.candidate().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturesRequest {
    pub pairs: Vec<PairPayload>,
}

/// Neural features of one pair; `mnli` is ordered contradiction, neutral,
/// entailment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuralFeatures {
    pub sem_sim: f64,
    pub mnli: [f64; 3],
    pub ppl_ref: f64,
    pub ppl_cand: f64,
}

impl NeuralFeatures {
    /// Adds the locally computed word counts.
    pub fn with_lengths(&self, pair: &SentencePair) -> FeatureVector {
        FeatureVector {
            sem_sim: self.sem_sim,
            mnli_contradiction: self.mnli[0],
            mnli_neutral: self.mnli[1],
            mnli_entailment: self.mnli[2],
            ppl_ref: self.ppl_ref,
            ppl_cand: self.ppl_cand,
            len_ref: saturating_u32(count_words(pair.reference())),
            len_cand: saturating_u32(count_words(pair.candidate())),
        }
    }
}

fn saturating_u32(n: usize) -> u32 {
    u32::try_from(n).unwrap_or(u32::MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesResponse {
    pub features: Vec<NeuralFeatures>,
    pub extractor_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemError {
    pub index: usize,
    pub message: String,
}

/// Body of a 422 response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub errors: Vec<ItemError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub extractor_version: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_shape_matches_wire_format() {
        let body = r#"{"features":[{"sem_sim":4.5,"mnli":[0.1,0.2,0.7],"ppl_ref":12.25,"ppl_cand":30.0}],"extractor_version":"v1"}"#;
        let r: FeaturesResponse = serde_json::from_str(body).unwrap();
        assert_eq!(r.features[0].mnli, [0.1, 0.2, 0.7]);
        let pair = SentencePair::new("The cat sat.", "A cat sat down").unwrap();
        let fv = r.features[0].with_lengths(&pair);
        assert_eq!((fv.len_ref, fv.len_cand), (3, 4));
        assert_eq!(fv.mnli_entailment, 0.7);
        let req = FeaturesRequest { pairs: vec![PairPayload::from(&pair)] };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"pairs":[{"reference":"The cat sat.","candidate":"A cat sat down"}]}"#
        );
    }
}
