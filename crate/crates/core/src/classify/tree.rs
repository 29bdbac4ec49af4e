//! Greedy CART induction with Gini impurity.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::dataset::{ClassId, NumericDataset};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: ClassId,
        distribution: BTreeMap<ClassId, usize>,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Arena of nodes; index 0 is the root.
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub params: TreeParams,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn predict_row(&self, row: &[f64]) -> ClassId {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

/// Majority class of dense class counts; ties go to the smallest class id.
fn majority(counts: &[usize], classes: &[ClassId]) -> ClassId {
    let mut best = 0;
    for c in 1..counts.len() {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    classes[best]
}

/// Sum over both sides of `n_side * gini(side)`.
fn weighted_gini(left: &[usize], n_left: usize, total: &[usize], n: usize) -> f64 {
    let n_right = n - n_left;
    let mut sq_left = 0.0;
    let mut sq_right = 0.0;
    for (l, t) in left.iter().zip(total) {
        let r = t - l;
        sq_left += (*l as f64) * (*l as f64);
        sq_right += (r as f64) * (r as f64);
    }
    (n_left as f64 - sq_left / n_left as f64) + (n_right as f64 - sq_right / n_right as f64)
}

/// Lowest-impurity split of `rows` on feature `j`, scanning midpoints
/// between consecutive distinct values; the smallest threshold wins ties.
fn best_split_on(
    ds: &NumericDataset,
    rows: &[usize],
    class_of: &[usize],
    total: &[usize],
    j: usize,
) -> Option<BestSplit> {
    let mut sorted: Vec<(f64, usize)> = rows
        .iter()
        .map(|&r| (ds.row(r)[j], class_of[r]))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let mut left = vec![0usize; total.len()];
    let mut best: Option<BestSplit> = None;
    for pos in 0..n - 1 {
        left[sorted[pos].1] += 1;
        let (a, b) = (sorted[pos].0, sorted[pos + 1].0);
        if a == b {
            continue;
        }
        let impurity = weighted_gini(&left, pos + 1, total, n);
        if best.as_ref().is_none_or(|s| impurity < s.impurity) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(BestSplit {
                impurity,
                feature: j,
                threshold,
            });
        }
    }
    best
}

/// Grows a tree on `train`. A node becomes a leaf when it is pure, at
/// `max_depth`, below `min_samples_split`, or has no distinct values to cut;
/// otherwise the best Gini split is taken even if it does not lower impurity.
pub fn train_tree(train: &NumericDataset, params: &TreeParams) -> Result<TreeModel, ClassifyError> {
    if train.n_rows() == 0 {
        return Err(ClassifyError::EmptyTraining);
    }
    let classes: Vec<ClassId> = train.class_counts().into_keys().collect();
    let dense: BTreeMap<ClassId, usize> =
        classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let class_of: Vec<usize> = train.labels().iter().map(|l| dense[l]).collect();

    let mut nodes: Vec<Node> = Vec::new();
    // (node slot, rows, depth)
    let mut pending: Vec<(usize, Vec<usize>, usize)> = vec![(0, (0..train.n_rows()).collect(), 0)];
    nodes.push(Node::Leaf {
        class: classes[0],
        distribution: BTreeMap::new(),
    });

    while let Some((slot, rows, depth)) = pending.pop() {
        let mut counts = vec![0usize; classes.len()];
        for &r in &rows {
            counts[class_of[r]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let stop = pure
            || rows.len() < params.min_samples_split.max(2)
            || params.max_depth.is_some_and(|d| depth >= d);
        let split = if stop {
            None
        } else {
            (0..train.n_features())
                .into_par_iter()
                .filter_map(|j| best_split_on(train, &rows, &class_of, &counts, j))
                .reduce_with(|a, b| {
                    if b.impurity < a.impurity || (b.impurity == a.impurity && b.feature < a.feature) {
                        b
                    } else {
                        a
                    }
                })
        };
        match split {
            None => {
                let distribution = counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(i, &c)| (classes[i], c))
                    .collect();
                nodes[slot] = Node::Leaf {
                    class: majority(&counts, &classes),
                    distribution,
                };
            }
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&i| train.row(i)[s.feature] <= s.threshold);
                debug_assert!(!l.is_empty() && !r.is_empty());
                let (li, ri) = (nodes.len(), nodes.len() + 1);
                for _ in 0..2 {
                    nodes.push(Node::Leaf {
                        class: classes[0],
                        distribution: BTreeMap::new(),
                    });
                }
                nodes[slot] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: li,
                    right: ri,
                };
                pending.push((ri, r, depth + 1));
                pending.push((li, l, depth + 1));
            }
        }
    }
    Ok(TreeModel {
        nodes,
        n_features: train.n_features(),
        params: params.clone(),
    })
}

pub fn predict_tree<'a, I>(model: &TreeModel, rows: I) -> Result<Vec<ClassId>, ClassifyError>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    rows.into_iter()
        .map(|row| {
            if row.len() != model.n_features {
                return Err(ClassifyError::WidthMismatch {
                    expected: model.n_features,
                    found: row.len(),
                });
            }
            Ok(model.predict_row(row))
        })
        .collect()
}
