//! Stump boosting, regression by discretization, pruned trees and random
//! forests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::ColumnRanks;
use super::tree::{grow_tree, grow_tree_ranked, prune, ClassTree, Stump, Tree, TreeParams};
use crate::numeric::RandomSource;

/// Forward stagewise boosting of regression stumps on residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModel {
    pub mean: f64,
    pub shrinkage: f64,
    pub stumps: Vec<Stump>,
}

impl AdditiveModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], iterations: usize, shrinkage: f64) -> Self {
        let n = targets.len();
        let mean = targets.iter().sum::<f64>() / n as f64;
        let all: Vec<usize> = (0..n).collect();
        let mut residual: Vec<f64> = targets.iter().map(|y| y - mean).collect();
        let mut stumps = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let s = Stump::fit(rows, &residual, None, &all);
            for (r, x) in residual.iter_mut().zip(rows) {
                *r -= shrinkage * s.predict(x);
            }
            stumps.push(s);
        }
        AdditiveModel {
            mean,
            shrinkage,
            stumps,
        }
    }

    /// Prediction after the first `stages` stumps.
    pub fn predict_stages(&self, x: &[f64], stages: usize) -> f64 {
        self.mean
            + self.stumps[..stages.min(self.stumps.len())]
                .iter()
                .map(|s| self.shrinkage * s.predict(x))
                .sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_stages(x, self.stumps.len())
    }
}

/// Equal-width target bins, a Gini tree over bin labels, and the mean
/// training target of the predicted bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedModel {
    pub lo: f64,
    pub width: f64,
    pub bins: usize,
    pub tree: ClassTree,
    /// Mean training target per bin; `None` for bins without rows.
    pub bin_means: Vec<Option<f64>>,
}

impl DiscretizedModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], bins: usize, min_leaf: usize) -> Self {
        let lo = targets.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let bins = if hi > lo { bins.max(1) } else { 1 };
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 0.0 };
        let labels: Vec<usize> = targets
            .iter()
            .map(|&y| bin_index(y, lo, width, bins))
            .collect();
        let mut sums = vec![(0.0, 0usize); bins];
        for (&l, &y) in labels.iter().zip(targets) {
            sums[l].0 += y;
            sums[l].1 += 1;
        }
        let bin_means = sums
            .into_iter()
            .map(|(s, c)| (c > 0).then(|| s / c as f64))
            .collect();
        let tree = ClassTree::fit(rows, &labels, bins, (0..targets.len()).collect(), min_leaf);
        DiscretizedModel {
            lo,
            width,
            bins,
            tree,
            bin_means,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let label = self.tree.predict(x);
        // leaves only carry labels seen in training
        self.bin_means[label].unwrap_or(self.lo)
    }
}

/// `min(floor((y - lo) / width), bins - 1)`; 0 when `width` is 0.
pub fn bin_index(y: f64, lo: f64, width: f64, bins: usize) -> usize {
    if width <= 0.0 {
        return 0;
    }
    (((y - lo) / width).floor().max(0.0) as usize).min(bins - 1)
}

/// Variance tree grown on a shuffled 75% of the rows and, when `prune` is
/// set, reduced-error pruned on the remaining `floor(n / 4)`.
pub fn fit_reptree(
    rows: &[Vec<f64>],
    targets: &[f64],
    params: TreeParams,
    prune_tree: bool,
    rng: &mut RandomSource,
) -> Tree {
    let n = targets.len();
    if !prune_tree {
        return grow_tree(rows, targets, (0..n).collect(), params, None);
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let hold = n / 4;
    let (holdout, grow) = order.split_at(hold);
    let mut grow = grow.to_vec();
    grow.sort_unstable();
    let mut tree = grow_tree(rows, targets, grow, params, None);
    prune(&mut tree, rows, targets, holdout);
    tree
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Tree `t` draws only from `RandomSource::new(seed).child(t)`, so the
    /// forest is identical however the trees are scheduled.
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], params: &ForestParams, seed: u64) -> Self {
        let n = targets.len();
        let root = RandomSource::new(seed);
        let ranks = ColumnRanks::new(rows);
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = root.child(t as u64);
                let sample: Vec<usize> = if params.bootstrap {
                    let mut s: Vec<usize> = (0..n).map(|_| rng.index(n)).collect();
                    s.sort_unstable();
                    s
                } else {
                    (0..n).collect()
                };
                grow_tree_ranked(rows, &ranks, targets, sample, params.tree, Some(&mut rng))
            })
            .collect();
        ForestModel { trees }
    }

    pub fn member_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_index_right_edge() {
        assert_eq!(bin_index(55.0, 0.0, 10.0, 10), 5);
        assert_eq!(bin_index(100.0, 0.0, 10.0, 10), 9);
        assert_eq!(bin_index(0.0, 0.0, 10.0, 10), 0);
    }

    #[test]
    fn zero_shrinkage_is_the_mean() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let y = [1.0, 9.0, 2.0, 8.0, 5.0];
        let m = AdditiveModel::fit(&rows, &y, 10, 0.0);
        for r in &rows {
            assert_eq!(m.predict(r), 5.0);
        }
    }

    #[test]
    fn one_stage_matches_plain_stump() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (5 - i) as f64 * 0.5]).collect();
        let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
        let m = AdditiveModel::fit(&rows, &y, 1, 1.0);
        let s = Stump::fit(&rows, &y, None, &[0, 1, 2, 3, 4, 5]);
        for r in &rows {
            assert!((m.predict(r) - s.predict(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_targets_give_single_bin() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let m = DiscretizedModel::fit(&rows, &[7.0; 4], 10, 2);
        assert_eq!(m.bins, 1);
        assert_eq!(m.predict(&[100.0]), 7.0);
    }

    #[test]
    fn step_function_plateaus_recovered() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 10.0 } else { 90.0 }).collect();
        let m = DiscretizedModel::fit(&rows, &y, 10, 2);
        assert_eq!(m.predict(&[3.0]), 10.0);
        assert_eq!(m.predict(&[15.0]), 90.0);
    }
}
