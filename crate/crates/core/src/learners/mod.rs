// SPDX-License-Identifier: Apache-2.0

//! Deterministic regressors: CART trees, random forests, gradient boosting
//! and a small GCN, with versioned JSON serialization.
//!
//! Floats are written with shortest round-trip formatting, so a saved model
//! reloads bit-identically.

mod ensemble;
mod gcn;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{
    fit_forest, fit_forest_oob, fit_gbm, fit_gbm_traced, splitmix64, tree_seed, Forest, ForestParams, Gbm,
    GbmParams,
};
pub use gcn::{
    gcn_gradcheck, gcn_train, GcnModel, GcnParams, GraphTensors, Gradient, HIDDEN1, HIDDEN2,
};
pub use tree::{fit_tree, RegressionTree, TreeNode, TreeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("model document version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("malformed model document: {0}")]
    Malformed(String),
}

/// Validate a design matrix; returns the feature count.
pub(crate) fn check_dataset(x: &[Vec<f64>], y: &[f64]) -> Result<usize, LearnError> {
    if x.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    if x.len() != y.len() {
        return Err(LearnError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(LearnError::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Tree(RegressionTree),
    Forest(Forest),
    Gbm(Gbm),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Tree(t) => t.n_features,
            Model::Forest(f) => f.trees.first().map_or(0, |t| t.n_features),
            Model::Gbm(g) => g.trees.first().map_or(0, |t| t.n_features),
        }
    }
}

/// Predict with a tabular model, checking the feature dimension.
pub fn predict_model(model: &Model, x: &[f64]) -> Result<f64, LearnError> {
    let d = model.n_features();
    if x.len() != d && d != 0 {
        return Err(LearnError::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    Ok(match model {
        Model::Tree(t) => t.predict(x),
        Model::Forest(f) => f.predict(x),
        Model::Gbm(g) => g.predict(x),
    })
}

pub const MODEL_FORMAT: &str = "sog-ppa-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

/// Serialize any model (tabular or GCN) inside a versioned envelope.
pub fn save_model<T: Serialize>(model: &T) -> String {
    let env = Envelope {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model,
    };
    serde_json::to_string(&env).expect("models serialize")
}

pub fn load_model<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, LearnError> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let header: Header =
        serde_json::from_str(text).map_err(|e| LearnError::Malformed(e.to_string()))?;
    if header.format != MODEL_FORMAT {
        return Err(LearnError::Malformed(format!("unknown format `{}`", header.format)));
    }
    if header.version != MODEL_VERSION {
        return Err(LearnError::Version {
            found: header.version,
            expected: MODEL_VERSION,
        });
    }
    let env: Envelope<T> =
        serde_json::from_str(text).map_err(|e| LearnError::Malformed(e.to_string()))?;
    Ok(env.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..150)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let y = x.iter().map(|r| r[0].exp() - r[1] * r[3] + 1.0 / 3.0).collect();
        (x, y)
    }

    #[test]
    fn forest_round_trip_is_exact() {
        let (x, y) = data(1);
        let f = Model::Forest(fit_forest(&x, &y, &ForestParams { n_estimators: 10, ..Default::default() }).unwrap());
        let back: Model = load_model(&save_model(&f)).unwrap();
        assert_eq!(back, f);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let probe: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert_eq!(
                predict_model(&f, &probe).unwrap().to_bits(),
                predict_model(&back, &probe).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let (x, y) = data(3);
        let g = Model::Gbm(fit_gbm(&x, &y, &GbmParams::default()).unwrap());
        let text = save_model(&g).replace("\"version\":1", "\"version\":2");
        assert_eq!(
            load_model::<Model>(&text),
            Err(LearnError::Version { found: 2, expected: 1 })
        );
        assert!(matches!(load_model::<Model>("{"), Err(LearnError::Malformed(_))));
    }

    #[test]
    fn gcn_round_trip_preserves_loss_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let graphs: Vec<(GraphTensors, f64)> = (0..5)
            .map(|i| {
                let n = 6 + i;
                let x = (0..n).map(|_| (0..14).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
                let edges: Vec<(u32, u32)> = (1..n as u32).map(|j| (j - 1, j)).collect();
                (GraphTensors::new(x, &edges).unwrap(), rng.gen_range(1.0..5.0))
            })
            .collect();
        let (m, _) = gcn_train(&graphs, &GcnParams { epochs: 10, ..Default::default() }).unwrap();
        let back: GcnModel = load_model(&save_model(&m)).unwrap();
        for (g, t) in &graphs {
            assert_eq!(m.loss(g, *t).unwrap().to_bits(), back.loss(g, *t).unwrap().to_bits());
        }
    }

    #[test]
    fn predict_dimension_checked() {
        let (x, y) = data(5);
        let t = Model::Tree(fit_tree(&x, &y, &TreeParams::default()).unwrap());
        assert!(matches!(
            predict_model(&t, &[1.0]),
            Err(LearnError::DimensionMismatch { expected: 4, got: 1 })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert_eq!(
            fit_tree(&[vec![f64::NAN]], &[1.0], &TreeParams::default()),
            Err(LearnError::NonFinite)
        );
    }
}
