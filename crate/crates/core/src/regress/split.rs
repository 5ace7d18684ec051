//! Exhaustive single-split search.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature; rows with `x <= threshold` go left. Among candidates with equal
//! cost the lower feature index wins, then the lower threshold.

/// Relative slack below which two costs count as tied.
const TIE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted cost after the split (SSE or weighted Gini impurity).
    pub cost: f64,
}

pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if t >= b {
        a
    } else {
        t
    }
}

/// Sorted `(value, row)` pairs for one feature over `indices`.
fn sorted_column(rows: &[Vec<f64>], indices: &[usize], feature: usize) -> Vec<(f64, usize)> {
    let mut col: Vec<(f64, usize)> = indices.iter().map(|&i| (rows[i][feature], i)).collect();
    col.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    col
}

/// Per-feature dense ranks of every row: equal values share a rank and the
/// rank order agrees with `f64::total_cmp`.
#[derive(Debug, Clone)]
pub struct ColumnRanks {
    ranks: Vec<Vec<u32>>,
}

impl ColumnRanks {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let all: Vec<usize> = (0..rows.len()).collect();
        let ranks = (0..d)
            .map(|f| {
                let col = sorted_column(rows, &all, f);
                let mut rank = vec![0u32; rows.len()];
                let mut r = 0u32;
                for k in 0..col.len() {
                    if k > 0 && col[k].0.total_cmp(&col[k - 1].0).is_gt() {
                        r += 1;
                    }
                    rank[col[k].1] = r;
                }
                rank
            })
            .collect();
        ColumnRanks { ranks }
    }

    /// Same order as sorting `(value, row)` pairs.
    fn sorted_column(&self, rows: &[Vec<f64>], indices: &[usize], feature: usize) -> Vec<(f64, usize)> {
        let rank = &self.ranks[feature];
        let mut keys: Vec<u64> = indices
            .iter()
            .map(|&i| ((rank[i] as u64) << 32) | i as u64)
            .collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(|k| {
                let i = (k & 0xffff_ffff) as usize;
                (rows[i][feature], i)
            })
            .collect()
    }
}

fn weighted_sse(w: f64, wy: f64, wyy: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        (wyy - wy * wy / w).max(0.0)
    }
}

/// Weighted SSE of the targets around their weighted mean.
pub fn node_sse(targets: &[f64], weights: Option<&[f64]>, indices: &[usize]) -> f64 {
    let (w, wy) = indices.iter().fold((0.0, 0.0), |(w, wy), &i| {
        let wi = weights.map_or(1.0, |ws| ws[i]);
        (w + wi, wy + wi * targets[i])
    });
    if w <= 0.0 {
        return 0.0;
    }
    let mean = wy / w;
    indices
        .iter()
        .map(|&i| {
            let wi = weights.map_or(1.0, |ws| ws[i]);
            let d = targets[i] - mean;
            wi * d * d
        })
        .sum()
}

pub fn weighted_mean(targets: &[f64], weights: Option<&[f64]>, indices: &[usize]) -> f64 {
    let (w, wy) = indices.iter().fold((0.0, 0.0), |(w, wy), &i| {
        let wi = weights.map_or(1.0, |ws| ws[i]);
        (w + wi, wy + wi * targets[i])
    });
    if w > 0.0 {
        wy / w
    } else {
        0.0
    }
}

/// Best SSE split of `indices` over `features` (visited in the given order,
/// which callers keep ascending). Each side must hold at least `min_leaf`
/// rows and positive total weight. Returns `None` when no candidate strictly
/// improves on the unsplit node.
pub fn best_sse_split(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: Option<&[f64]>,
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    if indices.len() < 2 * min_leaf.max(1) || features.is_empty() {
        return None;
    }
    let columns: Vec<(usize, Vec<(f64, usize)>)> = features
        .iter()
        .map(|&f| (f, sorted_column(rows, indices, f)))
        .collect();
    best_sse_split_presorted(&columns, targets, weights, min_leaf)
}

/// [`best_sse_split`] with columns ordered through precomputed ranks.
/// Requires fewer than 2^32 rows.
pub fn best_sse_split_ranked(
    rows: &[Vec<f64>],
    ranks: &ColumnRanks,
    targets: &[f64],
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    if indices.len() < 2 * min_leaf.max(1) || features.is_empty() {
        return None;
    }
    let columns: Vec<(usize, Vec<(f64, usize)>)> = features
        .iter()
        .map(|&f| (f, ranks.sorted_column(rows, indices, f)))
        .collect();
    best_sse_split_presorted(&columns, targets, None, min_leaf)
}

/// [`best_sse_split`] over columns that are already sorted by
/// `(value, row)`. Every column must list the same rows.
pub fn best_sse_split_presorted(
    columns: &[(usize, Vec<(f64, usize)>)],
    targets: &[f64],
    weights: Option<&[f64]>,
    min_leaf: usize,
) -> Option<Split> {
    let min_leaf = min_leaf.max(1);
    let first = &columns.first()?.1;
    if first.len() < 2 * min_leaf {
        return None;
    }
    let weight = |i: usize| weights.map_or(1.0, |ws| ws[i]);

    let (mut tw, mut twy) = (0.0, 0.0);
    for &(_, i) in first {
        tw += weight(i);
        twy += weight(i) * targets[i];
    }
    if tw <= 0.0 {
        return None;
    }
    let center = twy / tw;
    let (mut twy, mut twyy) = (0.0, 0.0);
    for &(_, i) in first {
        let y = targets[i] - center;
        twy += weight(i) * y;
        twyy += weight(i) * y * y;
    }
    let parent = twyy;
    let slack = TIE_SLACK * parent.max(f64::MIN_POSITIVE);

    let mut best: Option<Split> = None;
    for (f, col) in columns {
        let (mut lw, mut lwy, mut lwyy) = (0.0, 0.0, 0.0);
        for k in 0..col.len() - 1 {
            let (x, i) = col[k];
            let wi = weight(i);
            let y = targets[i] - center;
            lw += wi;
            lwy += wi * y;
            lwyy += wi * y * y;
            let next = col[k + 1].0;
            if next <= x {
                continue;
            }
            let left_n = k + 1;
            if left_n < min_leaf || col.len() - left_n < min_leaf {
                continue;
            }
            let rw = tw - lw;
            if lw <= 0.0 || rw <= 0.0 {
                continue;
            }
            let cost = weighted_sse(lw, lwy, lwyy) + weighted_sse(rw, twy - lwy, twyy - lwyy);
            let better = match best {
                None => true,
                Some(b) => cost < b.cost - slack,
            };
            if better {
                best = Some(Split {
                    feature: *f,
                    threshold: midpoint(x, next),
                    cost,
                });
            }
        }
    }
    best.filter(|b| b.cost < parent - slack)
}

fn gini_cost(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|c| c * c).sum();
    total - sq / total
}

/// Best split under size-weighted Gini impurity for integer class labels
/// `0..n_classes`. Same candidate set, tie rules and `None` contract as
/// [`best_sse_split`].
pub fn best_gini_split(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let min_leaf = min_leaf.max(1);
    if indices.len() < 2 * min_leaf {
        return None;
    }
    let mut total = vec![0.0; n_classes];
    for &i in indices {
        total[labels[i]] += 1.0;
    }
    let n = indices.len() as f64;
    let parent = gini_cost(&total, n);
    let slack = TIE_SLACK * parent.max(f64::MIN_POSITIVE);

    let mut best: Option<Split> = None;
    let mut left = vec![0.0; n_classes];
    let mut right = vec![0.0; n_classes];
    for &f in features {
        let col = sorted_column(rows, indices, f);
        left.iter_mut().for_each(|c| *c = 0.0);
        for k in 0..col.len() - 1 {
            let (x, i) = col[k];
            left[labels[i]] += 1.0;
            let next = col[k + 1].0;
            if next <= x {
                continue;
            }
            let left_n = k + 1;
            if left_n < min_leaf || col.len() - left_n < min_leaf {
                continue;
            }
            for c in 0..n_classes {
                right[c] = total[c] - left[c];
            }
            let ln = left_n as f64;
            let cost = gini_cost(&left, ln) + gini_cost(&right, n - ln);
            let better = match best {
                None => true,
                Some(b) => cost < b.cost - slack,
            };
            if better {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(x, next),
                    cost,
                });
            }
        }
    }
    best.filter(|b| b.cost < parent - slack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn four_point_fixture_splits_at_six() {
        let rows = one_d(&[1.0, 2.0, 10.0, 11.0]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let s = best_sse_split(&rows, &y, None, &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.threshold, 6.0);
        assert!(s.cost.abs() < 1e-12);
    }

    #[test]
    fn constant_targets_do_not_split() {
        let rows = one_d(&[1.0, 2.0, 3.0]);
        assert!(best_sse_split(&rows, &[5.0; 3], None, &[0, 1, 2], &[0], 1).is_none());
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // identical columns
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let s = best_sse_split(&rows, &[0.0, 1.0], None, &[0, 1], &[0, 1], 1).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn min_leaf_is_respected() {
        let rows = one_d(&[1.0, 2.0, 3.0, 4.0]);
        let y = [100.0, 0.0, 0.0, 0.0];
        let s = best_sse_split(&rows, &y, None, &[0, 1, 2, 3], &[0], 2).unwrap();
        assert_eq!(s.threshold, 2.5);
    }

    #[test]
    fn ranked_search_matches_plain_search() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![((i * 7) % 11) as f64, ((i * 13) % 5) as f64 * 0.5, -(i as f64)])
            .collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 31) % 17) as f64).collect();
        let ranks = ColumnRanks::new(&rows);
        let idx: Vec<usize> = (0..40).filter(|i| i % 3 != 0).chain([1, 1, 4]).collect();
        for features in [vec![0, 1, 2], vec![1], vec![0, 2]] {
            let a = best_sse_split(&rows, &y, None, &idx, &features, 1);
            let b = best_sse_split_ranked(&rows, &ranks, &y, &idx, &features, 1);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gini_separates_classes() {
        let rows = one_d(&[0.0, 1.0, 2.0, 3.0]);
        let labels = [0, 0, 1, 1];
        let s = best_gini_split(&rows, &labels, 2, &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.threshold, 1.5);
        assert_eq!(s.cost, 0.0);
    }
}
