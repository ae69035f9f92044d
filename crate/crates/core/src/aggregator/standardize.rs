use serde::{Deserialize, Serialize};

use crate::error::TrainError;

/// Lower bound on every stored standard deviation.
pub const STDDEV_FLOOR: f64 = 1e-8;

/// Per-dimension input conditioning fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

/// Sample mean and (n − 1) standard deviation per column, floored at
/// [`STDDEV_FLOOR`]. A constant column gets its exact value as mean so that
/// standardization maps it to 0.
pub fn fit_standardization(rows: &[Vec<f64>]) -> Result<StandardizationStats, TrainError> {
    if rows.len() < 2 {
        return Err(TrainError::TooFewRows {
            need: 2,
            got: rows.len(),
        });
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(TrainError::Shape {
            expected: dim,
            got: bad.len(),
        });
    }
    let n = rows.len() as f64;
    let mut mean = Vec::with_capacity(dim);
    let mut stddev = Vec::with_capacity(dim);
    for j in 0..dim {
        let first = rows[0][j];
        if rows.iter().all(|r| r[j] == first) {
            mean.push(first);
            stddev.push(STDDEV_FLOOR);
            continue;
        }
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean.push(m);
        stddev.push(var.sqrt().max(STDDEV_FLOOR));
    }
    Ok(StandardizationStats { mean, stddev })
}

impl StandardizationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, TrainError> {
        if x.len() != self.dim() {
            return Err(TrainError::Shape {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}
