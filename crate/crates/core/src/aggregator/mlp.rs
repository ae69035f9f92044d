//! Fully connected tanh network with a scalar head and hand-written backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    Linear,
    Tanh,
}

impl OutputActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Linear => z,
            OutputActivation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activated value.
    fn derivative(self, a: f64) -> f64 {
        match self {
            OutputActivation::Linear => 1.0,
            OutputActivation::Tanh => 1.0 - a * a,
        }
    }
}

/// `weights` is row-major, one row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: vec![vec![0.0; inputs]; outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

/// Hidden layers use tanh; the last layer has a single unit and
/// [`OutputActivation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
    pub output: OutputActivation,
}

impl MlpParams {
    /// All-zero parameters for `input_dim → width (× hidden_layers) → 1`.
    pub fn zeros(input_dim: usize, hidden_width: usize, hidden_layers: usize, output: OutputActivation) -> Self {
        let mut layers = Vec::with_capacity(hidden_layers + 1);
        let mut fan_in = input_dim;
        for _ in 0..hidden_layers {
            layers.push(DenseLayer::zeros(fan_in, hidden_width));
            fan_in = hidden_width;
        }
        layers.push(DenseLayer::zeros(fan_in, 1));
        Self { layers, output }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot<R: Rng>(
        rng: &mut R,
        input_dim: usize,
        hidden_width: usize,
        hidden_layers: usize,
        output: OutputActivation,
    ) -> Self {
        let mut params = Self::zeros(input_dim, hidden_width, hidden_layers, output);
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.inputs() + layer.outputs()) as f64).sqrt();
            for w in layer.weights.iter_mut().flatten() {
                *w = rng.random_range(-limit..limit);
            }
        }
        params
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum()
    }

    /// Weights row by row then biases, layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter().flatten());
            out.extend(&l.bias);
        }
        out
    }

    /// Inverse of [`MlpParams::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().flatten() {
                *w = it.next().expect("length checked");
            }
            for b in &mut l.bias {
                *b = it.next().expect("length checked");
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), TrainError> {
        if x.len() != self.input_dim() {
            return Err(TrainError::Shape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(acts.last().expect("input pushed"));
            let a = if i == last {
                z.into_iter().map(|v| self.output.apply(v)).collect()
            } else {
                z.into_iter().map(f64::tanh).collect()
            };
            acts.push(a);
        }
        acts
    }
}

pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Result<f64, TrainError> {
    params.check_input(x)?;
    Ok(params.activations(x).last().expect("output layer")[0])
}

/// Gradient of `0.5 · (forward(x) − target)²` with respect to every
/// parameter, shaped like `params`, plus the prediction.
pub fn mlp_backward(params: &MlpParams, x: &[f64], target: f64) -> Result<(MlpParams, f64), TrainError> {
    params.check_input(x)?;
    let acts = params.activations(x);
    let prediction = acts.last().expect("output layer")[0];
    let mut grads = params.clone();
    let last = params.layers.len() - 1;
    // delta = dL/dz for the current layer
    let mut delta = vec![(prediction - target) * params.output.derivative(prediction)];
    for i in (0..=last).rev() {
        let input = &acts[i];
        let g = &mut grads.layers[i];
        for (o, d) in delta.iter().enumerate() {
            for (w, a) in g.weights[o].iter_mut().zip(input) {
                *w = d * a;
            }
            g.bias[o] = *d;
        }
        if i > 0 {
            let layer = &params.layers[i];
            delta = (0..layer.inputs())
                .map(|k| {
                    let back: f64 = delta.iter().zip(&layer.weights).map(|(d, row)| d * row[k]).sum();
                    back * (1.0 - input[k] * input[k])
                })
                .collect();
        }
    }
    Ok((grads, prediction))
}
