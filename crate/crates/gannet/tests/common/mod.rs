//! Independent oracles shared by the integration and acceptance suites.
//! Everything here recomputes expected values from first principles and
//! stays off the implementation paths it checks.

#![allow(dead_code)]

use gannet::learn::{Forest, Node, Tree};

/// Exact binomial coefficients up to C(n_max, k) in integer arithmetic.
pub struct BinomTable {
    rows: Vec<Vec<u128>>,
}

impl BinomTable {
    pub fn up_to(n_max: usize) -> Self {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        BinomTable { rows }
    }

    pub fn choose(&self, n: usize, k: usize) -> u128 {
        if k > n {
            0
        } else {
            self.rows[n][k]
        }
    }
}

/// Exact hypergeometric upper tail P[X >= x] as a ratio of integer counts:
/// enumerating all C(population, draws) equally likely draws and counting
/// those with at least x annotated members.
pub fn exact_hypergeom_tail(
    table: &BinomTable,
    x: usize,
    population: usize,
    annotated: usize,
    draws: usize,
) -> f64 {
    let hi = annotated.min(draws);
    let lo = x.max((annotated + draws).saturating_sub(population));
    let mut favorable: u128 = 0;
    for i in lo..=hi {
        favorable += table.choose(annotated, i) * table.choose(population - annotated, draws - i);
    }
    let total = table.choose(population, draws);
    favorable as f64 / total as f64
}

/// Cover-weighted conditional expectation of a tree's output when only the
/// features in `mask` are known: untaken branches mix by training cover.
pub fn expvalue(tree: &Tree, node: usize, x: &[f64], mask: u32, n_labels: usize) -> Vec<f64> {
    match &tree.nodes[node] {
        Node::Leaf { fractions, .. } => fractions.clone(),
        Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
        } => {
            if mask & (1u32 << feature) != 0 {
                let next = if x[*feature] <= *threshold { *left } else { *right };
                expvalue(tree, next, x, mask, n_labels)
            } else {
                let lv = expvalue(tree, *left, x, mask, n_labels);
                let rv = expvalue(tree, *right, x, mask, n_labels);
                let wl = tree.nodes[*left].cover() as f64 / *cover as f64;
                let wr = tree.nodes[*right].cover() as f64 / *cover as f64;
                lv.iter().zip(&rv).map(|(l, r)| wl * l + wr * r).collect()
            }
        }
    }
}

/// Shapley values of one tree by full subset enumeration over at most 31
/// features; returns phi[feature * n_labels + label].
pub fn brute_force_tree_shap(tree: &Tree, x: &[f64], n_features: usize, n_labels: usize) -> Vec<f64> {
    assert!(n_features <= 20, "enumeration oracle is exponential");
    let n_subsets = 1usize << n_features;
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n_subsets);
    for mask in 0..n_subsets {
        values.push(expvalue(tree, 0, x, mask as u32, n_labels));
    }
    let mut factorial = vec![1.0f64; n_features + 1];
    for i in 1..=n_features {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; n_features * n_labels];
    for feature in 0..n_features {
        let bit = 1usize << feature;
        for mask in 0..n_subsets {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let weight = factorial[s] * factorial[n_features - s - 1] / factorial[n_features];
            for l in 0..n_labels {
                phi[feature * n_labels + l] +=
                    weight * (values[mask | bit][l] - values[mask][l]);
            }
        }
    }
    phi
}

/// Forest-level oracle: the mean of per-tree Shapley values, matching the
/// forest's mean-of-trees prediction.
pub fn brute_force_forest_shap(forest: &Forest, x: &[f64]) -> Vec<f64> {
    let n_features = forest.n_features;
    let n_labels = forest.n_labels();
    let mut phi = vec![0.0; n_features * n_labels];
    for tree in &forest.trees {
        for (acc, v) in phi
            .iter_mut()
            .zip(brute_force_tree_shap(tree, x, n_features, n_labels))
        {
            *acc += v;
        }
    }
    let scale = 1.0 / forest.trees.len() as f64;
    for v in &mut phi {
        *v *= scale;
    }
    phi
}

/// Forest-level base value oracle: cover-weighted expectation with nothing
/// known (the empty feature subset).
pub fn brute_force_base(forest: &Forest) -> Vec<f64> {
    let n_labels = forest.n_labels();
    let mut base = vec![0.0; n_labels];
    for tree in &forest.trees {
        for (acc, v) in base
            .iter_mut()
            .zip(expvalue(tree, 0, &vec![0.0; forest.n_features], 0, n_labels))
        {
            *acc += v;
        }
    }
    let scale = 1.0 / forest.trees.len() as f64;
    for v in &mut base {
        *v *= scale;
    }
    base
}
