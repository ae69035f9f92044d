//! Regressors mapping feature vectors to predicted human quality: ordinary
//! least squares and a tanh feed-forward network trained with ADAM.

mod adam;
mod linear;
mod mlp;
mod standardize;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use linear::{linreg_fit, LinearParams, RIDGE_LAMBDA};
pub use mlp::{mlp_backward, mlp_forward, DenseLayer, MlpParams, OutputActivation};
pub use standardize::{fit_standardization, StandardizationStats, STDDEV_FLOOR};

use crate::error::{ContractError, Error, TrainError};
use crate::model::{project, FeatureMask, FeatureVector};

/// Version written into every model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Smallest dataset `train` accepts.
pub const MIN_TRAIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorKind {
    /// Ordinary least squares ("LREG").
    Linreg,
    /// Feed-forward network ("NN").
    Mlp,
}

impl fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregatorKind::Linreg => "LReg",
            AggregatorKind::Mlp => "NN",
        })
    }
}

impl FromStr for AggregatorKind {
    type Err = ContractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nn" | "mlp" => Ok(AggregatorKind::Mlp),
            "lreg" | "linreg" => Ok(AggregatorKind::Linreg),
            other => Err(ContractError::InvalidConfig(format!(
                "unknown aggregator kind `{other}` (expected nn or lreg)"
            ))),
        }
    }
}

/// How perplexity coordinates enter the regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerplexityTransform {
    /// Natural log before standardization.
    #[default]
    Log,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: Loss,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub output_activation: OutputActivation,
    pub perplexity_transform: PerplexityTransform,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            loss: Loss::Mse,
            hidden_width: 10,
            hidden_layers: 1,
            output_activation: OutputActivation::Linear,
            perplexity_transform: PerplexityTransform::Log,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ContractError> {
        let bad = |m: &str| Err(ContractError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("ADAM betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 || self.hidden_width == 0 || self.hidden_layers == 0 {
            return bad("batch_size, hidden_width and hidden_layers must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AggregatorParams {
    Linear(LinearParams),
    Mlp(MlpParams),
}

/// A fitted regressor together with the input conditioning it was fitted on.
///
/// Serializes to the versioned model-file JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAggregator {
    pub format_version: u32,
    pub kind: AggregatorKind,
    pub mask: FeatureMask,
    pub perplexity_transform: PerplexityTransform,
    pub stats: StandardizationStats,
    pub params: AggregatorParams,
    pub config_digest: String,
}

impl TrainedAggregator {
    /// Masked, transformed (not yet standardized) model input.
    pub fn model_input(&self, fv: &FeatureVector) -> Vec<f64> {
        transformed_input(fv, self.mask, self.perplexity_transform)
    }

    fn regress(&self, z: &[f64]) -> Result<f64, TrainError> {
        match &self.params {
            AggregatorParams::Linear(p) => p.predict(z),
            AggregatorParams::Mlp(p) => mlp_forward(p, z),
        }
    }

    /// Linear coefficients mapped back from standardized space onto the
    /// transformed features; `None` for networks.
    pub fn effective_linear_coefficients(&self) -> Option<LinearParams> {
        let AggregatorParams::Linear(p) = &self.params else {
            return None;
        };
        let weights: Vec<f64> = p.weights.iter().zip(&self.stats.stddev).map(|(w, s)| w / s).collect();
        let shift: f64 = weights.iter().zip(&self.stats.mean).map(|(w, m)| w * m).sum();
        Some(LinearParams {
            weights,
            bias: p.bias - shift,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let model: TrainedAggregator =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        model.check().map_err(Error::ModelFormat)?;
        Ok(model)
    }

    fn check(&self) -> Result<(), String> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(format!("unsupported format_version {}", self.format_version));
        }
        let dim = self.mask.dim();
        let param_dim = match &self.params {
            AggregatorParams::Linear(p) => p.weights.len(),
            AggregatorParams::Mlp(p) => p.input_dim(),
        };
        if self.stats.dim() != dim || param_dim != dim || self.stats.stddev.len() != dim {
            return Err(format!("mask dimension {dim} does not match parameters"));
        }
        let kind_matches = matches!(
            (&self.params, self.kind),
            (AggregatorParams::Linear(_), AggregatorKind::Linreg) | (AggregatorParams::Mlp(_), AggregatorKind::Mlp)
        );
        if !kind_matches {
            return Err("kind does not match params".into());
        }
        Ok(())
    }

    /// SHA-256 of the serialized model file.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            context: format!("writing {}", path.display()),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn transformed_input(fv: &FeatureVector, mask: FeatureMask, transform: PerplexityTransform) -> Vec<f64> {
    let mut x = project(fv, mask);
    if transform == PerplexityTransform::Log {
        for i in mask.perplexity_positions() {
            x[i] = x[i].ln();
        }
    }
    x
}

/// Unbounded regressor output; calibration happens downstream.
pub fn predict_raw(model: &TrainedAggregator, fv: &FeatureVector) -> Result<f64, TrainError> {
    let violations = fv.validate();
    if !violations.is_empty() {
        return Err(TrainError::InvalidFeatures { index: 0, violations });
    }
    let z = model.stats.apply(&model.model_input(fv))?;
    model.regress(&z)
}

/// Per-epoch training trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    /// Mean squared error over the training set after each epoch.
    pub epoch_mse: Vec<f64>,
}

/// Fits standardization and the chosen regressor on `dataset`.
pub fn train(
    dataset: &[(FeatureVector, f64)],
    mask: FeatureMask,
    kind: AggregatorKind,
    config: &TrainConfig,
) -> Result<TrainedAggregator, TrainError> {
    train_with_history(dataset, mask, kind, config).map(|(m, _)| m)
}

pub fn train_with_history(
    dataset: &[(FeatureVector, f64)],
    mask: FeatureMask,
    kind: AggregatorKind,
    config: &TrainConfig,
) -> Result<(TrainedAggregator, TrainHistory), TrainError> {
    config.validate()?;
    if dataset.len() < MIN_TRAIN_ROWS {
        return Err(TrainError::TooFewRows {
            need: MIN_TRAIN_ROWS,
            got: dataset.len(),
        });
    }
    for (index, (fv, y)) in dataset.iter().enumerate() {
        let violations = fv.validate();
        if !violations.is_empty() {
            return Err(TrainError::InvalidFeatures { index, violations });
        }
        if !(0.0..=1.0).contains(y) {
            return Err(TrainError::TargetRange { index, value: *y });
        }
    }
    let raw: Vec<Vec<f64>> = dataset
        .iter()
        .map(|(fv, _)| transformed_input(fv, mask, config.perplexity_transform))
        .collect();
    let stats = fit_standardization(&raw)?;
    let inputs: Vec<Vec<f64>> = raw.iter().map(|r| stats.apply(r)).collect::<Result<_, _>>()?;
    let targets: Vec<f64> = dataset.iter().map(|(_, y)| *y).collect();

    let mut history = TrainHistory::default();
    let params = match kind {
        AggregatorKind::Linreg => {
            let p = linreg_fit(&inputs, &targets)?;
            let mse = inputs
                .iter()
                .zip(&targets)
                .map(|(x, y)| (p.predict(x).expect("shape checked") - y).powi(2))
                .sum::<f64>()
                / inputs.len() as f64;
            if !mse.is_finite() {
                return Err(TrainError::Divergence { epoch: 0 });
            }
            history.epoch_mse.push(mse);
            AggregatorParams::Linear(p)
        }
        AggregatorKind::Mlp => AggregatorParams::Mlp(fit_mlp(&inputs, &targets, config, &mut history)?),
    };
    Ok((
        TrainedAggregator {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            mask,
            perplexity_transform: config.perplexity_transform,
            stats,
            params,
            config_digest: config.digest(),
        },
        history,
    ))
}

/// Mini-batch ADAM on mean squared error; returns final-epoch parameters.
pub fn fit_mlp(
    inputs: &[Vec<f64>],
    targets: &[f64],
    config: &TrainConfig,
    history: &mut TrainHistory,
) -> Result<MlpParams, TrainError> {
    config.validate()?;
    let dim = inputs.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParams::glorot(
        &mut rng,
        dim,
        config.hidden_width,
        config.hidden_layers,
        config.output_activation,
    );
    let adam = config.adam();
    let mut flat = params.to_flat();
    let mut state = AdamState::new(flat.len());
    let mut grad_sum = vec![0.0; flat.len()];
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut step = 0u64;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad_sum.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (g, _) = mlp_backward(&params, &inputs[i], targets[i])?;
                for (acc, v) in grad_sum.iter_mut().zip(g.to_flat()) {
                    *acc += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad_sum.iter_mut().for_each(|g| *g *= scale);
            step += 1;
            adam_step(&mut state, &mut flat, &grad_sum, &adam, step);
            params.set_flat(&flat);
        }
        let mut sse = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            sse += (mlp_forward(&params, x)? - y).powi(2);
        }
        let mse = sse / inputs.len() as f64;
        if !mse.is_finite() || !params.is_finite() {
            return Err(TrainError::Divergence { epoch });
        }
        history.epoch_mse.push(mse);
    }
    Ok(params)
}
