// SPDX-License-Identifier: Apache-2.0

//! Random forest and squared-loss gradient boosting over CART trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, FeatureSampler, RegressionTree, TreeParams};
use super::{check_dataset, LearnError};

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of tree `index` under master seed `seed`:
/// `splitmix64(seed ^ splitmix64(index))`.
pub fn tree_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 80,
            max_depth: 20,
            min_samples_leaf: 2,
            feature_fraction: 1.0 / 3.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Forest, LearnError> {
    fit_forest_oob(x, y, params).map(|(f, _)| f)
}

/// Fit a forest and also return each training row's out-of-bag prediction
/// (mean over trees whose bootstrap sample missed the row; `None` if every
/// tree drew it).
pub fn fit_forest_oob(
    x: &[Vec<f64>],
    y: &[f64],
    params: &ForestParams,
) -> Result<(Forest, Vec<Option<f64>>), LearnError> {
    let d = check_dataset(x, y)?;
    if params.n_estimators == 0
        || !(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0)
    {
        return Err(LearnError::InvalidParams(format!("{params:?}")));
    }
    let per_split = ((params.feature_fraction * d as f64).ceil() as usize).clamp(1, d);
    let tp = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    };
    let n = x.len();
    let fitted: Vec<(RegressionTree, Vec<bool>)> = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, i as u64));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &r in &rows {
                in_bag[r] = true;
            }
            (grow(x, y, rows, &tp, Some(FeatureSampler { rng, per_split })), in_bag)
        })
        .collect();
    let oob = (0..n)
        .map(|r| {
            let preds: Vec<f64> = fitted
                .iter()
                .filter(|(_, bag)| !bag[r])
                .map(|(t, _)| t.predict(&x[r]))
                .collect();
            (!preds.is_empty()).then(|| preds.iter().sum::<f64>() / preds.len() as f64)
        })
        .collect();
    let trees = fitted.into_iter().map(|(t, _)| t).collect();
    Ok((Forest { trees }, oob))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub learning_rate: f64,
    /// Recorded for provenance; boosting here draws no random numbers.
    pub seed: u64,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            n_estimators: 45,
            max_depth: 8,
            min_samples_leaf: 2,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gbm {
    pub base_value: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl Gbm {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base_value + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Fit a boosted model; also returns the training MSE before the first tree
/// and after each stage.
pub fn fit_gbm_traced(
    x: &[Vec<f64>],
    y: &[f64],
    params: &GbmParams,
) -> Result<(Gbm, Vec<f64>), LearnError> {
    check_dataset(x, y)?;
    if params.learning_rate < 0.0 || !params.learning_rate.is_finite() {
        return Err(LearnError::InvalidParams(format!("{params:?}")));
    }
    let n = y.len() as f64;
    let base_value = y.iter().sum::<f64>() / n;
    let mut pred = vec![base_value; y.len()];
    let mse = |pred: &[f64]| pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let mut trace = vec![mse(&pred)];
    let tp = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    };
    let mut trees = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        let residual: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
        let tree = grow(x, &residual, (0..x.len()).collect(), &tp, None);
        for (p, row) in pred.iter_mut().zip(x) {
            *p += params.learning_rate * tree.predict(row);
        }
        trace.push(mse(&pred));
        trees.push(tree);
    }
    Ok((
        Gbm {
            base_value,
            learning_rate: params.learning_rate,
            trees,
        },
        trace,
    ))
}

pub fn fit_gbm(x: &[Vec<f64>], y: &[f64], params: &GbmParams) -> Result<Gbm, LearnError> {
    fit_gbm_traced(x, y, params).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::fit_tree;

    pub(crate) fn synthetic(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y = x
            .iter()
            .map(|r| 3.0 * r[0] - 2.0 * r[1] * r[2] + (4.0 * r[3]).sin() + 0.1 * rng.gen_range(-1.0..1.0))
            .collect();
        (x, y)
    }

    #[test]
    fn single_tree_forest_equals_tree() {
        let (x, y) = synthetic(120, 1);
        let f = fit_forest(
            &x,
            &y,
            &ForestParams {
                n_estimators: 1,
                feature_fraction: 1.0,
                bootstrap: false,
                max_depth: 6,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let t = fit_tree(
            &x,
            &y,
            &TreeParams {
                max_depth: 6,
                min_samples_leaf: 2,
            },
        )
        .unwrap();
        assert_eq!(f.trees[0], t);
        for row in &x {
            assert_eq!(f.predict(row), t.predict(row));
        }
    }

    #[test]
    fn forest_prediction_is_member_mean() {
        let (x, y) = synthetic(100, 2);
        let f = fit_forest(&x, &y, &ForestParams { n_estimators: 7, ..ForestParams::default() }).unwrap();
        let (probe, _) = synthetic(20, 3);
        for row in &probe {
            let mean = f.trees.iter().map(|t| t.predict(row)).sum::<f64>() / 7.0;
            assert_eq!(f.predict(row), mean);
        }
    }

    #[test]
    fn forest_independent_of_thread_count() {
        let (x, y) = synthetic(150, 4);
        let p = ForestParams { n_estimators: 12, seed: 99, ..ForestParams::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| fit_forest(&x, &y, &p).unwrap());
        let b = four.install(|| fit_forest(&x, &y, &p).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn oob_uses_only_trees_that_missed_the_row() {
        let (x, y) = synthetic(40, 8);
        let p = ForestParams { n_estimators: 6, ..ForestParams::default() };
        let (f, oob) = fit_forest_oob(&x, &y, &p).unwrap();
        assert_eq!(f, fit_forest(&x, &y, &p).unwrap());
        let covered = oob.iter().flatten().count();
        // each row is out of bag for a tree with probability about 1/e
        assert!(covered > 20, "{covered}");
        let (_, none) = fit_forest_oob(&x, &y, &ForestParams { bootstrap: false, ..p }).unwrap();
        assert!(none.iter().all(Option::is_none));
    }

    #[test]
    fn zero_learning_rate_predicts_mean() {
        let (x, y) = synthetic(60, 5);
        let g = fit_gbm(&x, &y, &GbmParams { learning_rate: 0.0, ..GbmParams::default() }).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        for row in &x {
            assert_eq!(g.predict(row), mean);
        }
    }

    #[test]
    fn boosting_loss_never_increases() {
        let (x, y) = synthetic(200, 6);
        let (_, trace) = fit_gbm_traced(&x, &y, &GbmParams::default()).unwrap();
        assert_eq!(trace.len(), 46);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
        assert!(trace[45] < 0.1 * trace[0]);
    }

    #[test]
    fn tree_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| tree_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
