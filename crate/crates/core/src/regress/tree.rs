//! Regression stumps and variance-reduction trees, with optional
//! reduced-error pruning, plus the Gini classification tree used by
//! regression-by-discretization.

use serde::{Deserialize, Serialize};

use super::split::{
    best_gini_split, best_sse_split, best_sse_split_ranked, node_sse, weighted_mean, ColumnRanks,
};
use crate::numeric::RandomSource;

/// One split with a constant on each side, or a single constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    /// `(feature, threshold)`; `None` for a single-leaf stump.
    pub split: Option<(usize, f64)>,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn constant(value: f64) -> Self {
        Stump {
            split: None,
            left: value,
            right: value,
        }
    }

    /// Fits on `indices` with optional per-row weights. Falls back to a
    /// single leaf at the weighted mean when no split lowers the SSE.
    pub fn fit(
        rows: &[Vec<f64>],
        targets: &[f64],
        weights: Option<&[f64]>,
        indices: &[usize],
    ) -> Stump {
        let d = rows.first().map_or(0, |r| r.len());
        let features: Vec<usize> = (0..d).collect();
        match best_sse_split(rows, targets, weights, indices, &features, 1) {
            None => Stump::constant(weighted_mean(targets, weights, indices)),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| rows[i][s.feature] <= s.threshold);
                Stump {
                    split: Some((s.feature, s.threshold)),
                    left: weighted_mean(targets, weights, &l),
                    right: weighted_mean(targets, weights, &r),
                }
            }
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.split {
            Some((f, t)) if x[f] > t => self.right,
            _ => self.left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Mean of the training rows reaching this node.
        value: f64,
    },
}

/// Binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Reachable nodes from the root.
    pub fn node_count(&self) -> usize {
        let mut stack = vec![0];
        let mut count = 0;
        while let Some(i) = stack.pop() {
            count += 1;
            if let Node::Split { left, right, .. } = &self.nodes[i] {
                stack.push(*left);
                stack.push(*right);
            }
        }
        count
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// `None` for unlimited depth.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Number of features drawn per node; `None` evaluates all of them.
    pub features_per_split: Option<usize>,
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    ranks: &'a ColumnRanks,
    targets: &'a [f64],
    params: TreeParams,
    rng: Option<&'a mut RandomSource>,
    nodes: Vec<Node>,
    dim: usize,
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        match (self.params.features_per_split, self.rng.as_deref_mut()) {
            (Some(f), Some(rng)) if f < self.dim => {
                let mut all: Vec<usize> = (0..self.dim).collect();
                // partial Fisher-Yates
                for k in 0..f {
                    let j = k + rng.index(self.dim - k);
                    all.swap(k, j);
                }
                let mut chosen = all[..f].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..self.dim).collect(),
        }
    }

    fn grow(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let value = weighted_mean(self.targets, None, &indices);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value });
        if self.params.max_depth.is_some_and(|m| depth >= m) {
            return at;
        }
        let features = self.candidate_features();
        let Some(split) = best_sse_split_ranked(
            self.rows,
            self.ranks,
            self.targets,
            &indices,
            &features,
            self.params.min_leaf,
        ) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.rows[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            value,
        };
        at
    }
}

/// Grows a variance-reduction tree on `indices`. Growth stops at
/// `max_depth`, when a node has fewer than `2 * min_leaf` rows, or when no
/// split lowers the SSE.
pub fn grow_tree(
    rows: &[Vec<f64>],
    targets: &[f64],
    indices: Vec<usize>,
    params: TreeParams,
    rng: Option<&mut RandomSource>,
) -> Tree {
    grow_tree_ranked(rows, &ColumnRanks::new(rows), targets, indices, params, rng)
}

/// [`grow_tree`] reusing ranks computed once for `rows`.
pub fn grow_tree_ranked(
    rows: &[Vec<f64>],
    ranks: &ColumnRanks,
    targets: &[f64],
    indices: Vec<usize>,
    params: TreeParams,
    rng: Option<&mut RandomSource>,
) -> Tree {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut b = Builder {
        rows,
        ranks,
        targets,
        params,
        rng,
        nodes: Vec::new(),
        dim,
    };
    if indices.is_empty() {
        return Tree {
            nodes: vec![Node::Leaf { value: 0.0 }],
        };
    }
    b.grow(indices, 0);
    Tree { nodes: b.nodes }
}

/// Reduced-error pruning: bottom-up, a subtree becomes a leaf (at its
/// training mean) when its SSE on the holdout rows exceeds that of the leaf.
pub fn prune(tree: &mut Tree, rows: &[Vec<f64>], targets: &[f64], holdout: &[usize]) {
    fn go(tree: &mut Tree, at: usize, rows: &[Vec<f64>], targets: &[f64], idx: &[usize]) -> f64 {
        match tree.nodes[at].clone() {
            Node::Leaf { value } => idx.iter().map(|&i| (targets[i] - value).powi(2)).sum(),
            Node::Split {
                feature,
                threshold,
                left,
                right,
                value,
            } => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| rows[i][feature] <= threshold);
                let subtree = go(tree, left, rows, targets, &l) + go(tree, right, rows, targets, &r);
                let as_leaf: f64 = idx.iter().map(|&i| (targets[i] - value).powi(2)).sum();
                if subtree > as_leaf {
                    tree.nodes[at] = Node::Leaf { value };
                    as_leaf
                } else {
                    subtree
                }
            }
        }
    }
    go(tree, 0, rows, targets, holdout);
}

/// Classification tree over integer labels with Gini splits and majority
/// leaves (ties go to the lower label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTree {
    pub nodes: Vec<ClassNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassNode {
    Leaf {
        label: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

impl ClassTree {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        indices: Vec<usize>,
        min_leaf: usize,
    ) -> ClassTree {
        fn grow(
            nodes: &mut Vec<ClassNode>,
            rows: &[Vec<f64>],
            labels: &[usize],
            n_classes: usize,
            indices: Vec<usize>,
            min_leaf: usize,
            features: &[usize],
        ) -> usize {
            let mut counts = vec![0usize; n_classes];
            for &i in &indices {
                counts[labels[i]] += 1;
            }
            let mut label = 0;
            for (c, &n) in counts.iter().enumerate() {
                if n > counts[label] {
                    label = c;
                }
            }
            let at = nodes.len();
            nodes.push(ClassNode::Leaf { label });
            let Some(s) = best_gini_split(rows, labels, n_classes, &indices, features, min_leaf)
            else {
                return at;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = indices
                .into_iter()
                .partition(|&i| rows[i][s.feature] <= s.threshold);
            let left = grow(nodes, rows, labels, n_classes, l, min_leaf, features);
            let right = grow(nodes, rows, labels, n_classes, r, min_leaf, features);
            nodes[at] = ClassNode::Split {
                feature: s.feature,
                threshold: s.threshold,
                left,
                right,
            };
            at
        }
        let d = rows.first().map_or(0, |r| r.len());
        let features: Vec<usize> = (0..d).collect();
        let mut nodes = Vec::new();
        grow(&mut nodes, rows, labels, n_classes, indices, min_leaf, &features);
        ClassTree { nodes }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                ClassNode::Leaf { label } => return *label,
                ClassNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

/// Training SSE of any predictor over `indices`.
pub fn training_sse(
    rows: &[Vec<f64>],
    targets: &[f64],
    indices: &[usize],
    predict: impl Fn(&[f64]) -> f64,
) -> f64 {
    indices
        .iter()
        .map(|&i| (targets[i] - predict(&rows[i])).powi(2))
        .sum()
}

#[allow(dead_code)]
pub(crate) fn leaf_sse(targets: &[f64], indices: &[usize]) -> f64 {
    node_sse(targets, None, indices)
}
