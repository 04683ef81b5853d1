//! The supervised core: a multi-output random forest (one tree predicts all
//! labels jointly) plus stratified k-fold splitting. Forests are
//! deterministic for a fixed seed: each tree draws its bootstrap sample and
//! feature subsets from a stream derived from (seed, tree index).

mod kfold;
mod tree;

pub use kfold::{stratified_kfold, FoldPlan};
pub use tree::{grow_tree, Node, Tree};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{derive_seed, Matrix};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("feature count mismatch: forest was trained on {expected}, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("features have {features} rows but labels have {labels}")]
    RowMismatch { features: usize, labels: usize },
    #[error("cannot fit a forest on zero rows")]
    EmptyTraining,
    #[error("{folds} folds exceed the {samples} available samples")]
    TooFewSamples { folds: usize, samples: usize },
    #[error("model file is not valid: {0}")]
    BadModelFile(String),
}

/// Binary label matrix, rows aligned with the feature rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    n_rows: usize,
    n_labels: usize,
    data: Vec<bool>,
}

impl LabelMatrix {
    pub fn zeros(n_rows: usize, n_labels: usize) -> Self {
        LabelMatrix {
            n_rows,
            n_labels,
            data: vec![false; n_rows * n_labels],
        }
    }

    pub fn from_rows(rows: Vec<Vec<bool>>) -> Self {
        let n_rows = rows.len();
        let n_labels = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_labels);
        for row in rows {
            assert_eq!(row.len(), n_labels, "ragged label rows");
            data.extend_from_slice(&row);
        }
        LabelMatrix {
            n_rows,
            n_labels,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    #[inline]
    pub fn get(&self, row: usize, label: usize) -> bool {
        self.data[row * self.n_labels + label]
    }

    pub fn set(&mut self, row: usize, label: usize, value: bool) {
        self.data[row * self.n_labels + label] = value;
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.data[row * self.n_labels..(row + 1) * self.n_labels]
    }

    pub fn select_rows(&self, rows: &[usize]) -> LabelMatrix {
        let mut out = LabelMatrix::zeros(rows.len(), self.n_labels);
        for (i, &r) in rows.iter().enumerate() {
            for l in 0..self.n_labels {
                out.set(i, l, self.get(r, l));
            }
        }
        out
    }

    pub fn positives_per_label(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_labels];
        for r in 0..self.n_rows {
            for (c, v) in counts.iter_mut().zip(self.row(r)) {
                *c += usize::from(*v);
            }
        }
        counts
    }

    pub fn total_positives(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// How many features each split may consider.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// ceil(sqrt(n_features)), the classification default.
    Sqrt,
    /// Every feature (useful for small exact fixtures).
    All,
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::All => n_features,
        }
        .max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            min_samples_split: 5,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// A fitted multi-output random forest. The model file is a versioned JSON
/// dump carrying the parameters and column metadata along with the trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub params: ForestParams,
    pub n_features: usize,
    pub label_ids: Vec<String>,
    pub feature_descriptors: Vec<String>,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn n_labels(&self) -> usize {
        self.label_ids.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Forest, LearnError> {
        let forest: Forest =
            serde_json::from_str(text).map_err(|e| LearnError::BadModelFile(e.to_string()))?;
        if forest.version != 1 {
            return Err(LearnError::BadModelFile(format!(
                "unsupported model version {}",
                forest.version
            )));
        }
        Ok(forest)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), LearnError> {
        std::fs::write(path, self.to_json()).map_err(|e| LearnError::BadModelFile(e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Forest, LearnError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LearnError::BadModelFile(e.to_string()))?;
        Forest::from_json(&text)
    }
}

/// Fit `params.n_trees` CART trees on bootstrap samples.
pub fn fit(
    features: &Matrix,
    labels: &LabelMatrix,
    label_ids: &[String],
    feature_descriptors: &[String],
    params: &ForestParams,
) -> Result<Forest, LearnError> {
    if features.n_rows() != labels.n_rows() {
        return Err(LearnError::RowMismatch {
            features: features.n_rows(),
            labels: labels.n_rows(),
        });
    }
    if features.n_rows() == 0 {
        return Err(LearnError::EmptyTraining);
    }
    assert_eq!(label_ids.len(), labels.n_labels());
    assert_eq!(feature_descriptors.len(), features.n_cols());
    let n = features.n_rows();
    let n_candidates = params.max_features.resolve(features.n_cols());
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha12Rng::seed_from_u64(derive_seed(params.seed, &format!("tree/{t}")));
            let rows: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            grow_tree(
                features,
                labels,
                rows,
                params.min_samples_split,
                n_candidates,
                &mut rng,
            )
        })
        .collect();
    Ok(Forest {
        version: 1,
        params: *params,
        n_features: features.n_cols(),
        label_ids: label_ids.to_vec(),
        feature_descriptors: feature_descriptors.to_vec(),
        trees,
    })
}

/// Per-row, per-label probabilities: the mean of leaf positive fractions
/// across trees.
pub fn predict_proba(forest: &Forest, features: &Matrix) -> Result<Matrix, LearnError> {
    if features.n_cols() != forest.n_features {
        return Err(LearnError::FeatureMismatch {
            expected: forest.n_features,
            got: features.n_cols(),
        });
    }
    let n_labels = forest.n_labels();
    let scale = 1.0 / forest.trees.len() as f64;
    let rows: Vec<Vec<f64>> = (0..features.n_rows())
        .into_par_iter()
        .map(|r| {
            let row = features.row(r);
            let mut acc = vec![0.0; n_labels];
            for tree in &forest.trees {
                for (a, &f) in acc.iter_mut().zip(tree.predict_row(row)) {
                    *a += f;
                }
            }
            for a in &mut acc {
                *a *= scale;
            }
            acc
        })
        .collect();
    Ok(Matrix::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn separable_fixture(n: usize) -> (Matrix, LabelMatrix) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![if i < n / 2 { 0.0 + i as f64 * 1e-3 } else { 1.0 + i as f64 * 1e-3 }])
            .collect();
        let labels = LabelMatrix::from_rows((0..n).map(|i| vec![i >= n / 2]).collect());
        (Matrix::from_rows(rows), labels)
    }

    #[test]
    fn perfect_split_learned() {
        let (features, labels) = separable_fixture(100);
        let params = ForestParams {
            n_trees: 25,
            seed: 5,
            ..ForestParams::default()
        };
        let forest = fit(&features, &labels, &names("l", 1), &names("f", 1), &params).unwrap();
        let probs = predict_proba(&forest, &features).unwrap();
        for r in 0..100 {
            let p = probs.get(r, 0);
            if r < 50 {
                assert!(p <= 0.05, "row {r} got {p}");
            } else {
                assert!(p >= 0.95, "row {r} got {p}");
            }
        }
    }

    #[test]
    fn identical_rows_predict_the_prior() {
        let features = Matrix::from_rows(vec![vec![1.0, 2.0]; 40]);
        let labels = LabelMatrix::from_rows((0..40).map(|i| vec![i % 2 == 0]).collect());
        let params = ForestParams {
            n_trees: 60,
            seed: 9,
            ..ForestParams::default()
        };
        let forest = fit(&features, &labels, &names("l", 1), &names("f", 2), &params).unwrap();
        let probs = predict_proba(&forest, &features).unwrap();
        assert!((probs.get(0, 0) - 0.5).abs() <= 0.1);
    }

    #[test]
    fn same_seed_bit_identical() {
        let (features, labels) = separable_fixture(30);
        let params = ForestParams {
            n_trees: 10,
            seed: 77,
            ..ForestParams::default()
        };
        let a = fit(&features, &labels, &names("l", 1), &names("f", 1), &params).unwrap();
        let b = fit(&features, &labels, &names("l", 1), &names("f", 1), &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn prediction_independent_of_batch() {
        let (features, labels) = separable_fixture(40);
        let params = ForestParams {
            n_trees: 15,
            seed: 3,
            ..ForestParams::default()
        };
        let forest = fit(&features, &labels, &names("l", 1), &names("f", 1), &params).unwrap();
        let batch = predict_proba(&forest, &features).unwrap();
        for r in [0usize, 13, 39] {
            let single = predict_proba(&forest, &features.select_rows(&[r])).unwrap();
            assert_eq!(single.get(0, 0), batch.get(r, 0));
        }
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let (features, labels) = separable_fixture(24);
        let params = ForestParams {
            n_trees: 8,
            seed: 21,
            ..ForestParams::default()
        };
        let forest = fit(&features, &labels, &names("l", 1), &names("f", 1), &params).unwrap();
        let back = Forest::from_json(&forest.to_json()).unwrap();
        assert_eq!(back, forest);
        let probs_a = predict_proba(&forest, &features).unwrap();
        let probs_b = predict_proba(&back, &features).unwrap();
        assert_eq!(probs_a, probs_b);
    }

    #[test]
    fn prediction_averages_leaf_fractions() {
        let stump = |value: f64| Tree {
            nodes: vec![Node::Leaf {
                fractions: vec![value],
                cover: 10,
            }],
        };
        let mut forest = Forest {
            version: 1,
            params: ForestParams::default(),
            n_features: 1,
            label_ids: vec!["l".into()],
            feature_descriptors: vec!["f".into()],
            trees: vec![stump(0.2)],
        };
        let x = Matrix::from_rows(vec![vec![0.0]]);
        assert_eq!(predict_proba(&forest, &x).unwrap().get(0, 0), 0.2);
        forest.trees = vec![stump(0.0), stump(1.0)];
        assert_eq!(predict_proba(&forest, &x).unwrap().get(0, 0), 0.5);
    }

    #[test]
    fn feature_mismatch_is_rejected() {
        let (features, labels) = separable_fixture(12);
        let params = ForestParams {
            n_trees: 2,
            seed: 0,
            ..ForestParams::default()
        };
        let forest = fit(&features, &labels, &names("l", 1), &names("f", 1), &params).unwrap();
        let wide = Matrix::zeros(3, 2);
        assert!(matches!(
            predict_proba(&forest, &wide),
            Err(LearnError::FeatureMismatch { .. })
        ));
    }

    #[test]
    fn constant_labels_predict_constant() {
        let features = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let labels = LabelMatrix::from_rows(vec![vec![true]; 4]);
        let params = ForestParams {
            n_trees: 5,
            min_samples_split: 2,
            ..ForestParams::default()
        };
        let forest = fit(&features, &labels, &names("l", 1), &names("f", 1), &params).unwrap();
        let probs = predict_proba(&forest, &features).unwrap();
        for r in 0..4 {
            assert_eq!(probs.get(r, 0), 1.0);
        }
    }
}
