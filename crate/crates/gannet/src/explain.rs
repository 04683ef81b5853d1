//! Path-dependent TreeSHAP for the multi-output forests, mean-absolute
//! aggregation of the attributions, and the cumulative-cutoff feature
//! selection that produces the reduced training matrix.
//!
//! The conditional expectation underlying the attributions weights each
//! untaken branch by its training cover, so the values admit an exact
//! subset-enumeration oracle with the same expectation definition.

use rayon::prelude::*;
use thiserror::Error;

use crate::learn::{Forest, Node, Tree};
use crate::util::Matrix;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("feature count mismatch: forest was trained on {expected}, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("every column has zero importance")]
    AllZeroImportance,
    #[error("attribution matrix is empty")]
    EmptyAttributions,
}

/// Shapley values per (instance, feature, label) plus the per-label
/// expected output of the forest.
#[derive(Clone, Debug)]
pub struct AttributionMatrix {
    pub n_instances: usize,
    pub n_features: usize,
    pub n_labels: usize,
    values: Vec<f64>,
    pub base_values: Vec<f64>,
}

impl AttributionMatrix {
    #[inline]
    pub fn get(&self, instance: usize, feature: usize, label: usize) -> f64 {
        self.values[(instance * self.n_features + feature) * self.n_labels + label]
    }
}

#[derive(Clone, Copy, Debug)]
struct PathElement {
    feature: isize,
    zero_frac: f64,
    one_frac: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero_frac: f64, one_frac: f64, feature: isize) {
    let l = path.len();
    path.push(PathElement {
        feature,
        zero_frac,
        one_frac,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    let lf = (l + 1) as f64;
    for i in (0..l).rev() {
        path[i + 1].weight += one_frac * path[i].weight * (i + 1) as f64 / lf;
        path[i].weight = zero_frac * path[i].weight * (l - i) as f64 / lf;
    }
}

fn unwind(path: &mut Vec<PathElement>, i: usize) {
    let l = path.len();
    let one = path[i].one_frac;
    let zero = path[i].zero_frac;
    let lf = l as f64;
    let mut next = path[l - 1].weight;
    for j in (0..l - 1).rev() {
        if one != 0.0 {
            let tmp = path[j].weight;
            path[j].weight = next * lf / ((j + 1) as f64 * one);
            next = tmp - path[j].weight * zero * (lf - (j + 1) as f64) / lf;
        } else {
            path[j].weight = path[j].weight * lf / (zero * (lf - (j + 1) as f64));
        }
    }
    for j in i..l - 1 {
        path[j].feature = path[j + 1].feature;
        path[j].zero_frac = path[j + 1].zero_frac;
        path[j].one_frac = path[j + 1].one_frac;
    }
    path.pop();
}

/// Total weight of the path with element `i` unwound, without mutating it.
fn unwound_sum(path: &[PathElement], i: usize) -> f64 {
    let l = path.len();
    let one = path[i].one_frac;
    let zero = path[i].zero_frac;
    let lf = l as f64;
    let mut total = 0.0;
    if one != 0.0 {
        let mut next = path[l - 1].weight;
        for j in (0..l - 1).rev() {
            let tmp = next * lf / ((j + 1) as f64 * one);
            total += tmp;
            next = path[j].weight - tmp * zero * (lf - (j + 1) as f64) / lf;
        }
    } else {
        for j in (0..l - 1).rev() {
            total += path[j].weight * lf / (zero * (lf - (j + 1) as f64));
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    node: usize,
    row: &[f64],
    parent_path: &[PathElement],
    zero_frac: f64,
    one_frac: f64,
    feature_ix: isize,
    phi: &mut [f64],
    n_labels: usize,
) {
    let mut path = parent_path.to_vec();
    extend(&mut path, zero_frac, one_frac, feature_ix);
    match &tree.nodes[node] {
        Node::Leaf { fractions, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let scale = w * (path[i].one_frac - path[i].zero_frac);
                let f = path[i].feature as usize;
                for (l, &value) in fractions.iter().enumerate() {
                    phi[f * n_labels + l] += scale * value;
                }
            }
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
        } => {
            let (hot, cold) = if row[*feature] <= *threshold {
                (*left, *right)
            } else {
                (*right, *left)
            };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = path.iter().position(|e| e.feature == *feature as isize) {
                incoming_zero = path[k].zero_frac;
                incoming_one = path[k].one_frac;
                unwind(&mut path, k);
            }
            let node_cover = *cover as f64;
            let hot_cover = tree.nodes[hot].cover() as f64;
            let cold_cover = tree.nodes[cold].cover() as f64;
            recurse(
                tree,
                hot,
                row,
                &path,
                incoming_zero * hot_cover / node_cover,
                incoming_one,
                *feature as isize,
                phi,
                n_labels,
            );
            recurse(
                tree,
                cold,
                row,
                &path,
                incoming_zero * cold_cover / node_cover,
                0.0,
                *feature as isize,
                phi,
                n_labels,
            );
        }
    }
}

/// Attributions for one tree and one instance, accumulated into `phi`
/// (n_features x n_labels, flattened).
pub fn tree_shap_single(tree: &Tree, row: &[f64], n_labels: usize, phi: &mut [f64]) {
    recurse(tree, 0, row, &[], 1.0, 1.0, -1, phi, n_labels);
}

/// TreeSHAP over every instance: per-tree attributions averaged across the
/// forest, matching the forest's mean-of-trees prediction semantics.
pub fn tree_shap(forest: &Forest, instances: &Matrix) -> Result<AttributionMatrix, ExplainError> {
    if instances.n_cols() != forest.n_features {
        return Err(ExplainError::FeatureMismatch {
            expected: forest.n_features,
            got: instances.n_cols(),
        });
    }
    let n_features = forest.n_features;
    let n_labels = forest.n_labels();
    let scale = 1.0 / forest.trees.len() as f64;
    let per_instance: Vec<Vec<f64>> = (0..instances.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = instances.row(i);
            let mut phi = vec![0.0; n_features * n_labels];
            for tree in &forest.trees {
                tree_shap_single(tree, row, n_labels, &mut phi);
            }
            for v in &mut phi {
                *v *= scale;
            }
            phi
        })
        .collect();
    let mut values = Vec::with_capacity(instances.n_rows() * n_features * n_labels);
    for phi in per_instance {
        values.extend_from_slice(&phi);
    }
    let mut base_values = vec![0.0; n_labels];
    for tree in &forest.trees {
        for (b, v) in base_values.iter_mut().zip(tree.base_values(n_labels)) {
            *b += v;
        }
    }
    for b in &mut base_values {
        *b *= scale;
    }
    Ok(AttributionMatrix {
        n_instances: instances.n_rows(),
        n_features,
        n_labels,
        values,
        base_values,
    })
}

/// Mean over instances and labels of |attribution|, per feature column.
pub fn mean_abs_importance(att: &AttributionMatrix) -> Vec<f64> {
    let denom = (att.n_instances * att.n_labels) as f64;
    let mut importance = vec![0.0; att.n_features];
    for i in 0..att.n_instances {
        for f in 0..att.n_features {
            for l in 0..att.n_labels {
                importance[f] += att.get(i, f, l).abs();
            }
        }
    }
    for v in &mut importance {
        *v /= denom;
    }
    importance
}

/// Columns selected by the cumulative importance cutoff.
#[derive(Clone, Debug)]
pub struct SelectionResult {
    /// Column indexes in descending importance order.
    pub selected_columns: Vec<usize>,
    /// Number of selected columns.
    pub theta: usize,
    /// The full importance vector (original column order).
    pub importance: Vec<f64>,
}

/// Sort columns by importance (descending, ties by index) and keep the
/// smallest prefix whose importance sum reaches `cutoff` times the total.
pub fn select_features(importance: &[f64], cutoff: f64) -> Result<SelectionResult, ExplainError> {
    assert!((0.0..=1.0).contains(&cutoff), "cutoff must lie in [0, 1]");
    if importance.is_empty() {
        return Err(ExplainError::EmptyAttributions);
    }
    let total: f64 = importance.iter().sum();
    if total <= 0.0 {
        return Err(ExplainError::AllZeroImportance);
    }
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| {
        importance[b]
            .partial_cmp(&importance[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    // A touch of slack keeps c = 1.0 from spilling into zero-importance
    // columns on account of summation order.
    let threshold = cutoff * total - 1e-12 * total;
    let mut selected = Vec::new();
    let mut cumulative = 0.0;
    for &col in &order {
        selected.push(col);
        cumulative += importance[col];
        if cumulative >= threshold {
            break;
        }
    }
    let theta = selected.len();
    Ok(SelectionResult {
        selected_columns: selected,
        theta,
        importance: importance.to_vec(),
    })
}
