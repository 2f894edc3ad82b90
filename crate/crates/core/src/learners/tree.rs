// SPDX-License-Identifier: Apache-2.0

//! CART regression trees (squared error).

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dataset, LearnError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: usize::MAX,
            min_samples_leaf: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub n_features: usize,
    /// Root is node 0.
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, at: usize) -> usize {
            match &t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(t, *left as usize).max(walk(t, *right as usize))
                }
            }
        }
        walk(self, 0)
    }
}

pub fn fit_tree(x: &[Vec<f64>], y: &[f64], params: &TreeParams) -> Result<RegressionTree, LearnError> {
    check_dataset(x, y)?;
    let rows: Vec<usize> = (0..x.len()).collect();
    Ok(grow(x, y, rows, params, None))
}

/// Per-split feature subsampling for forests.
pub(crate) struct FeatureSampler {
    pub rng: ChaCha8Rng,
    pub per_split: usize,
}

pub(crate) fn grow(
    x: &[Vec<f64>],
    y: &[f64],
    rows: Vec<usize>,
    params: &TreeParams,
    mut sampler: Option<FeatureSampler>,
) -> RegressionTree {
    let n_features = x[0].len();
    let mut tree = RegressionTree {
        n_features,
        nodes: Vec::new(),
    };
    // (rows, depth, slot to patch in the parent)
    let mut stack: Vec<(Vec<usize>, usize, Option<(usize, bool)>)> = vec![(rows, 0, None)];
    while let Some((rows, depth, parent)) = stack.pop() {
        let id = tree.nodes.len() as u32;
        if let Some((p, is_left)) = parent {
            if let TreeNode::Split { left, right, .. } = &mut tree.nodes[p] {
                *(if is_left { left } else { right }) = id;
            }
        }
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
        let constant = rows.iter().all(|&r| y[r] == y[rows[0]]);
        let split = if depth >= params.max_depth
            || rows.len() < 2 * params.min_samples_leaf.max(1)
            || constant
        {
            None
        } else {
            let features: Vec<usize> = match sampler.as_mut() {
                Some(s) if s.per_split < n_features => {
                    let mut f = sample(&mut s.rng, n_features, s.per_split).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => (0..n_features).collect(),
            };
            best_split(x, y, &rows, &features, params.min_samples_leaf.max(1))
        };
        match split {
            None => tree.nodes.push(TreeNode::Leaf { value: mean }),
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x[i][feature] <= threshold);
                tree.nodes.push(TreeNode::Split {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                });
                // right pushed first so the left subtree is numbered first
                stack.push((r, depth + 1, Some((id as usize, false))));
                stack.push((l, depth + 1, Some((id as usize, true))));
            }
        }
    }
    tree
}

/// Best (feature, threshold) by squared-error reduction. Thresholds are
/// midpoints between consecutive distinct values; ties go to the lowest
/// feature, then the lowest threshold.
fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let base = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = 0.0;
        for k in 1..n {
            left += y[order[k - 1]];
            let (lo, hi) = (x[order[k - 1]][f], x[order[k]][f]);
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right = total - left;
            let gain = left * left / k as f64 + right * right / (n - k) as f64 - base;
            if best.map_or(gain > 0.0, |(g, _, _)| gain > g) {
                best = Some((gain, f, lo + (hi - lo) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
