use serde::{Deserialize, Serialize};

use super::scale;
use crate::error::Result;
use crate::numeric::{dot, SpdFactor};

/// Ridge regression with an unpenalized intercept. Fitting happens on
/// min/max-normalized columns; the stored coefficients are mapped back to
/// raw feature units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], ridge: f64) -> Result<Self> {
        let (scaler, z) = scale(rows)?;
        let n = z.len() as f64;
        let d = scaler.dimension();

        let mut zmean = vec![0.0; d];
        for r in &z {
            for (m, v) in zmean.iter_mut().zip(r) {
                *m += v;
            }
        }
        zmean.iter_mut().for_each(|m| *m /= n);
        let ymean = targets.iter().sum::<f64>() / n;

        // centered normal equations: (ZcᵀZc + λI) w = Zcᵀ yc
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        let mut centered = vec![0.0; d];
        for (r, y) in z.iter().zip(targets) {
            for j in 0..d {
                centered[j] = r[j] - zmean[j];
            }
            let yc = y - ymean;
            for i in 0..d {
                let ci = centered[i];
                rhs[i] += ci * yc;
                for j in 0..=i {
                    gram[i * d + j] += ci * centered[j];
                }
            }
        }
        for i in 0..d {
            gram[i * d + i] += ridge;
        }
        // a column with zero spread and zero ridge would make the system
        // singular; it carries no signal, so pin its weight to zero
        for i in 0..d {
            if gram[i * d + i] == 0.0 {
                gram[i * d + i] = 1.0;
            }
        }
        let factor = SpdFactor::from_fn(d, |i, j| if j <= i { gram[i * d + j] } else { 0.0 })?;
        let wn = factor.solve(&rhs)?;

        let mut weights = vec![0.0; d];
        let mut intercept = ymean;
        for j in 0..d {
            let span = scaler.max[j] - scaler.min[j];
            if span > 0.0 {
                weights[j] = wn[j] / span;
                intercept -= wn[j] * (scaler.min[j] / span + zmean[j]);
            }
        }
        Ok(LinearModel { weights, intercept })
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.weights, x)
    }
}
