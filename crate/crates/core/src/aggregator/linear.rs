use serde::{Deserialize, Serialize};

use crate::error::TrainError;

/// Ridge term added to the weight block when the normal equations are singular.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Relative pivot size below which a system is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearParams {
    pub fn predict(&self, x: &[f64]) -> Result<f64, TrainError> {
        if x.len() != self.weights.len() {
            return Err(TrainError::Shape {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

/// Solves `a · x = b` in place by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[pivot][col].abs() > PIVOT_TOLERANCE * scale) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Ordinary least squares with intercept via the normal equations, retrying
/// with a ridge of [`RIDGE_LAMBDA`] on the weights if they are singular.
pub fn linreg_fit(rows: &[Vec<f64>], targets: &[f64]) -> Result<LinearParams, TrainError> {
    if rows.len() != targets.len() {
        return Err(TrainError::Shape {
            expected: rows.len(),
            got: targets.len(),
        });
    }
    let dim = rows.first().map_or(0, Vec::len);
    if rows.len() < dim + 1 || rows.is_empty() {
        return Err(TrainError::TooFewRows {
            need: dim + 1,
            got: rows.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(TrainError::Shape {
            expected: dim,
            got: bad.len(),
        });
    }
    // augmented design: the intercept column sits last
    let size = dim + 1;
    let mut gram = vec![vec![0.0; size]; size];
    let mut rhs = vec![0.0; size];
    for (r, &y) in rows.iter().zip(targets) {
        for i in 0..size {
            let xi = if i < dim { r[i] } else { 1.0 };
            rhs[i] += xi * y;
            for j in i..size {
                let xj = if j < dim { r[j] } else { 1.0 };
                gram[i][j] += xi * xj;
            }
        }
    }
    for i in 0..size {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
    }
    let solution = solve(gram.clone(), rhs.clone()).or_else(|| {
        let mut ridged = gram;
        for (i, row) in ridged.iter_mut().enumerate().take(dim) {
            row[i] += RIDGE_LAMBDA;
        }
        solve(ridged, rhs)
    });
    let mut beta = solution.ok_or(TrainError::Singular)?;
    let bias = beta.pop().expect("intercept");
    Ok(LinearParams {
        weights: beta,
        bias,
    })
}
