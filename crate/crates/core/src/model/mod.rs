//! Seeded random-forest classifier and its metrics.

mod tree;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use tree::{DecisionTree, TreeParams};

use crate::dataset::DataTable;
use crate::rng;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("training data must contain both classes")]
    DegenerateClass,
    #[error("table has no rows")]
    EmptyTable,
    #[error("missing feature `{0}`")]
    MissingFeature(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid forest parameters: {0}")]
    InvalidParams(&'static str),
    #[error("previous test accuracy is zero")]
    ZeroBaseline,
}

/// Number of candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => libm::floor(libm::sqrt(n_features as f64)) as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: MaxFeatures::Sqrt,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub n_train_samples: usize,
    pub n_features: usize,
}

/// A named record for single-row prediction.
pub type Record = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// The two class labels in ascending order; trees predict indices into this.
    pub labels: [f64; 2],
    pub trees: Vec<DecisionTree>,
    pub metrics: ModelMetrics,
}

/// Bootstrap-sample `n` indices with replacement.
pub(crate) fn bootstrap<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Predictor matrix and class indices of `table`, in canonical row-id order.
pub(crate) fn design(table: &DataTable, labels: [f64; 2]) -> (Vec<Vec<f64>>, Vec<u8>) {
    let t = table.target_index();
    let canon = table.canonicalized();
    let x = canon
        .rows()
        .iter()
        .map(|r| r[..t].to_vec())
        .collect();
    let y = canon.rows().iter().map(|r| u8::from(r[t] == labels[1])).collect();
    (x, y)
}

/// Train the forest on `train` and score it on both parts.
///
/// Rows are put in canonical row-id order before any sampling, and tree `i`
/// draws its bootstrap sample and split features from the stream
/// `(seed, i)`, so the result is a function of the row set and the params.
pub fn train_forest(train: &DataTable, test: &DataTable, params: &ForestParams) -> Result<TrainedModel, ModelError> {
    if params.n_trees == 0 {
        return Err(ModelError::InvalidParams("n_trees must be >= 1"));
    }
    if params.min_leaf == 0 {
        return Err(ModelError::InvalidParams("min_leaf must be >= 1"));
    }
    if train.n_rows() == 0 || test.n_rows() == 0 {
        return Err(ModelError::EmptyTable);
    }
    let labels = train.labels();
    if labels.len() != 2 {
        return Err(ModelError::DegenerateClass);
    }
    let labels = [labels[0], labels[1]];
    let (x, y) = design(train, labels);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: params.features_per_split,
    };
    let trees = (0..params.n_trees)
        .map(|i| {
            let mut r = rng::stream(params.seed, &[rng::TAG_TREE, i as u64]);
            let samples = bootstrap(x.len(), &mut r);
            DecisionTree::fit(&x, &y, samples, &tree_params, &mut r)
        })
        .collect();
    let mut model = TrainedModel {
        params: *params,
        feature_names: train.predictor_names(),
        target_name: train.target_name().into(),
        labels,
        trees,
        metrics: ModelMetrics {
            train_accuracy: 0.0,
            test_accuracy: 0.0,
            n_train_samples: train.n_rows(),
            n_features: train.target_index(),
        },
    };
    model.metrics.train_accuracy = model.accuracy(train)?;
    model.metrics.test_accuracy = model.accuracy(test)?;
    Ok(model)
}

impl TrainedModel {
    /// Majority vote over the trees; a tied vote goes to the lower label.
    pub fn vote(&self, x: &[f64]) -> f64 {
        let ones = self.trees.iter().filter(|t| t.predict_class(x) == 1).count();
        if 2 * ones > self.trees.len() {
            self.labels[1]
        } else {
            self.labels[0]
        }
    }

    pub fn predict(&self, row: &Record) -> Result<f64, ModelError> {
        let x = self
            .feature_names
            .iter()
            .map(|f| row.get(f).copied().ok_or_else(|| ModelError::MissingFeature(f.clone())))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(self.vote(&x))
    }

    /// Positions of the model features within `table`'s schema.
    pub fn column_map(&self, table: &DataTable) -> Result<Vec<usize>, ModelError> {
        self.feature_names
            .iter()
            .map(|f| table.feature_index(f).ok_or_else(|| ModelError::MissingFeature(f.clone())))
            .collect()
    }

    /// Predictions for every row of `table`, in table order.
    pub fn predict_table(&self, table: &DataTable) -> Result<Vec<f64>, ModelError> {
        let cols = self.column_map(table)?;
        let mut x = Vec::with_capacity(cols.len());
        Ok(table
            .rows()
            .iter()
            .map(|r| {
                x.clear();
                x.extend(cols.iter().map(|&c| r[c]));
                self.vote(&x)
            })
            .collect())
    }

    pub fn accuracy(&self, table: &DataTable) -> Result<f64, ModelError> {
        if table.target_name() != self.target_name {
            return Err(ModelError::SchemaMismatch(alloc::format!(
                "target `{}` != `{}`",
                table.target_name(),
                self.target_name
            )));
        }
        if table.n_rows() == 0 {
            return Err(ModelError::EmptyTable);
        }
        let preds = self.predict_table(table)?;
        let t = table.target_index();
        let hits = preds
            .iter()
            .zip(table.rows())
            .filter(|(p, r)| **p == r[t])
            .count();
        Ok(hits as f64 / table.n_rows() as f64)
    }

    /// Wrap hand-built trees, for tests and snapshot tooling.
    pub fn from_trees(
        feature_names: Vec<String>,
        target_name: String,
        labels: [f64; 2],
        trees: Vec<DecisionTree>,
    ) -> Self {
        let n_features = feature_names.len();
        TrainedModel {
            params: ForestParams {
                n_trees: trees.len(),
                ..ForestParams::default()
            },
            feature_names,
            target_name,
            labels,
            trees,
            metrics: ModelMetrics {
                train_accuracy: 0.0,
                test_accuracy: 0.0,
                n_train_samples: 0,
                n_features,
            },
        }
    }
}

/// Signed percent change of test accuracy, rounded half-up to one decimal.
pub fn accuracy_delta(current: &ModelMetrics, previous: &ModelMetrics) -> Result<f64, ModelError> {
    if previous.test_accuracy <= 0.0 {
        return Err(ModelError::ZeroBaseline);
    }
    let pct = 100.0 * (current.test_accuracy - previous.test_accuracy) / previous.test_accuracy;
    // Snap away float noise (4.999999999 -> 5.0) before rounding.
    let snapped = libm::round(pct * 1e9) / 1e9;
    Ok(libm::floor(snapped * 10.0 + 0.5) / 10.0)
}
