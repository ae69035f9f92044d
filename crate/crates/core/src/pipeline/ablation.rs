use serde::{Deserialize, Serialize};

use crate::aggregator::{predict_raw, train, AggregatorKind, TrainConfig};
use crate::correlation::{evaluate, EvalItem, Protocol};
use crate::error::{ContractError, Error};
use crate::model::{EvalReport, FeatureMask, FeatureVector};

/// A test candidate with features against each of its references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturedItem {
    pub group: String,
    pub segment_id: u64,
    pub candidate: String,
    /// One vector per reference; the item's metric score is the maximum.
    pub features: Vec<FeatureVector>,
    /// Human judgment on its native scale.
    pub human: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationDataset {
    /// Features with targets in [0, 1].
    pub train: Vec<(FeatureVector, f64)>,
    pub test: Vec<FeaturedItem>,
    pub protocol: Protocol,
}

#[derive(Debug)]
pub struct AblationRow {
    pub mask: FeatureMask,
    pub report: Result<EvalReport, Error>,
}

/// Trains one aggregator per mask on the same split and seed and evaluates
/// raw regressor outputs. A failing mask does not stop the others.
pub fn run_ablation(
    dataset: &AblationDataset,
    masks: &[FeatureMask],
    kind: AggregatorKind,
    config: &TrainConfig,
) -> Result<Vec<AblationRow>, ContractError> {
    if masks.is_empty() {
        return Err(ContractError::EmptyMask);
    }
    if dataset.test.iter().any(|t| t.features.is_empty()) {
        return Err(ContractError::InvalidConfig("every test item needs at least one reference".into()));
    }
    config.validate()?;
    Ok(masks
        .iter()
        .map(|&mask| AblationRow {
            mask,
            report: evaluate_mask(dataset, mask, kind, config),
        })
        .collect())
}

fn evaluate_mask(
    dataset: &AblationDataset,
    mask: FeatureMask,
    kind: AggregatorKind,
    config: &TrainConfig,
) -> Result<EvalReport, Error> {
    let model = train(&dataset.train, mask, kind, config)?;
    let mut items = Vec::with_capacity(dataset.test.len());
    for t in &dataset.test {
        let mut best = f64::NEG_INFINITY;
        for fv in &t.features {
            best = best.max(predict_raw(&model, fv)?);
        }
        items.push(EvalItem {
            group: t.group.clone(),
            segment_id: t.segment_id,
            candidate: t.candidate.clone(),
            human: t.human,
            metric: best,
        });
    }
    Ok(evaluate(dataset.protocol, &items)?)
}
