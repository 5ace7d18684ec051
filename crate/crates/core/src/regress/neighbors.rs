//! Instance-based learners: k-nearest-neighbour averaging and locally
//! weighted stumps. Both work on min/max-normalized features.

use serde::{Deserialize, Serialize};

use super::scale;
use super::split::{best_sse_split_presorted, weighted_mean};
use crate::error::{Error, Result};
use crate::features::ColumnScaler;
use crate::numeric::squared_distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbkModel {
    pub k: usize,
    pub scaler: ColumnScaler,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl IbkModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("IBk: k must be at least 1".into()));
        }
        let (scaler, rows) = scale(rows)?;
        Ok(IbkModel {
            k,
            scaler,
            rows,
            targets: targets.to_vec(),
        })
    }

    /// Indices of the `k` nearest training rows; equal distances go to the
    /// lower row index.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let q = self.scaler.transform(x);
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (squared_distance(&q, r), i))
            .collect();
        let k = self.k.min(d.len());
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, order);
            d.truncate(k);
        }
        d.sort_unstable_by(order);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let nn = self.neighbours(x);
        nn.iter().map(|&i| self.targets[i]).sum::<f64>() / nn.len() as f64
    }
}

/// Lazy locally weighted learner: each query reweights the training rows
/// with a linear kernel over normalized distance and fits a weighted stump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwlModel {
    pub scaler: ColumnScaler,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Per-feature `(value, row)` pairs in ascending order.
    #[serde(skip)]
    columns: Vec<(usize, Vec<(f64, usize)>)>,
}

impl LwlModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        let (scaler, rows) = scale(rows)?;
        let mut m = LwlModel {
            scaler,
            rows,
            targets: targets.to_vec(),
            columns: Vec::new(),
        };
        m.rebuild_index();
        Ok(m)
    }

    pub(crate) fn rebuild_index(&mut self) {
        let d = self.scaler.dimension();
        self.columns = (0..d)
            .map(|f| {
                let mut col: Vec<(f64, usize)> =
                    self.rows.iter().enumerate().map(|(i, r)| (r[f], i)).collect();
                col.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                (f, col)
            })
            .collect();
    }

    /// Kernel weights `max(0, 1 - d / d_max)` for a raw query. When every
    /// weight would vanish (all rows at the same distance) the weights are
    /// uniform instead.
    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        let q = self.scaler.transform(x);
        let dist: Vec<f64> = self
            .rows
            .iter()
            .map(|r| squared_distance(&q, r).sqrt())
            .collect();
        let dmax = dist.iter().cloned().fold(0.0, f64::max);
        let mut w: Vec<f64> = if dmax > 0.0 {
            dist.iter().map(|d| (1.0 - d / dmax).max(0.0)).collect()
        } else {
            vec![1.0; dist.len()]
        };
        if w.iter().all(|v| *v == 0.0) {
            w.iter_mut().for_each(|v| *v = 1.0);
        }
        w
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let w = self.weights(x);
        let q = self.scaler.transform(x);
        match best_sse_split_presorted(&self.columns, &self.targets, Some(&w), 1) {
            None => {
                let all: Vec<usize> = (0..self.rows.len()).collect();
                weighted_mean(&self.targets, Some(&w), &all)
            }
            Some(s) => {
                let go_left = q[s.feature] <= s.threshold;
                let side: Vec<usize> = (0..self.rows.len())
                    .filter(|&i| (self.rows[i][s.feature] <= s.threshold) == go_left)
                    .collect();
                weighted_mean(&self.targets, Some(&w), &side)
            }
        }
    }
}
