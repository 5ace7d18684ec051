use serde::{Deserialize, Serialize};

use super::scale;
use crate::error::Result;
use crate::features::ColumnScaler;
use crate::numeric::{squared_distance, SpdFactor};

/// Gaussian-process regression with an RBF kernel
/// `k(u, v) = exp(-gamma * |u - v|^2)` on normalized inputs and centered
/// targets. Prediction is the posterior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProcessModel {
    pub gamma: f64,
    pub noise: f64,
    pub mean: f64,
    pub scaler: ColumnScaler,
    pub rows: Vec<Vec<f64>>,
    /// `(K + noise * I)^-1 (y - mean)`
    pub alpha: Vec<f64>,
}

impl GaussianProcessModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], gamma: f64, noise: f64) -> Result<Self> {
        let (scaler, z) = scale(rows)?;
        let n = z.len();
        let mean = targets.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = targets.iter().map(|y| y - mean).collect();

        let factor = SpdFactor::from_fn(n, |i, j| {
            if j > i {
                0.0
            } else if i == j {
                1.0 + noise
            } else {
                (-gamma * squared_distance(&z[i], &z[j])).exp()
            }
        })?;
        let alpha = factor.solve(&centered)?;
        Ok(GaussianProcessModel {
            gamma,
            noise,
            mean,
            scaler,
            rows: z,
            alpha,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let q = self.scaler.transform(x);
        let k: f64 = self
            .rows
            .iter()
            .zip(&self.alpha)
            .map(|(r, a)| a * (-self.gamma * squared_distance(&q, r)).exp())
            .sum();
        self.mean + k
    }
}
