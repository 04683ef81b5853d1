//! Multi-output CART trees: binary splits on feature <= threshold, Gini
//! impurity summed over labels, leaves holding per-label positive fractions.
//! Node covers (bootstrap sample counts) are kept for TreeSHAP.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::util::Matrix;

use super::LabelMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: u32,
    },
    Leaf {
        fractions: Vec<f64>,
        cover: u32,
    },
}

impl Node {
    pub fn cover(&self) -> u32 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row<'a>(&'a self, row: &[f64]) -> &'a [f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { fractions, .. } => return fractions,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Cover-weighted mean leaf value per label (the expected prediction).
    pub fn base_values(&self, n_labels: usize) -> Vec<f64> {
        let root_cover = self.nodes[0].cover() as f64;
        let mut acc = vec![0.0; n_labels];
        for node in &self.nodes {
            if let Node::Leaf { fractions, cover } = node {
                for (a, &f) in acc.iter_mut().zip(fractions) {
                    *a += f * (*cover as f64) / root_cover;
                }
            }
        }
        acc
    }
}

/// Sum over labels of the binary Gini impurity 2p(1-p).
fn gini_sum(counts: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / nf;
            2.0 * p * (1.0 - p)
        })
        .sum()
}

struct Grower<'a> {
    features: &'a Matrix,
    labels: &'a LabelMatrix,
    min_samples_split: usize,
    n_candidates: usize,
    nodes: Vec<Node>,
}

const GAIN_EPS: f64 = 1e-12;

impl<'a> Grower<'a> {
    fn label_counts(&self, rows: &[u32]) -> Vec<usize> {
        let mut counts = vec![0usize; self.labels.n_labels()];
        for &r in rows {
            for (c, l) in counts.iter_mut().zip(self.labels.row(r as usize)) {
                *c += usize::from(*l);
            }
        }
        counts
    }

    fn leaf(&mut self, rows: &[u32], counts: &[usize]) -> usize {
        let n = rows.len() as f64;
        let fractions = counts.iter().map(|&c| c as f64 / n).collect();
        self.nodes.push(Node::Leaf {
            fractions,
            cover: rows.len() as u32,
        });
        self.nodes.len() - 1
    }

    /// Distinct random feature indexes by partial Fisher-Yates.
    fn draw_features(&self, rng: &mut ChaCha12Rng) -> Vec<usize> {
        let total = self.features.n_cols();
        let want = self.n_candidates.min(total);
        let mut pool: Vec<usize> = (0..total).collect();
        for i in 0..want {
            let j = rng.gen_range(i..total);
            pool.swap(i, j);
        }
        pool.truncate(want);
        pool
    }

    fn best_split(
        &self,
        rows: &[u32],
        counts: &[usize],
        candidates: &[usize],
    ) -> Option<(usize, f64, f64)> {
        let n = rows.len();
        let parent = gini_sum(counts, n);
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, gain)
        let mut order: Vec<u32> = Vec::with_capacity(n);
        for &feature in candidates {
            order.clear();
            order.extend_from_slice(rows);
            order.sort_unstable_by(|&a, &b| {
                self.features
                    .get(a as usize, feature)
                    .partial_cmp(&self.features.get(b as usize, feature))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut left = vec![0usize; self.labels.n_labels()];
            for i in 0..n - 1 {
                let row = order[i] as usize;
                for (c, l) in left.iter_mut().zip(self.labels.row(row)) {
                    *c += usize::from(*l);
                }
                let here = self.features.get(row, feature);
                let next = self.features.get(order[i + 1] as usize, feature);
                if here == next {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                let right: Vec<usize> = counts.iter().zip(&left).map(|(&t, &l)| t - l).collect();
                let child = (nl as f64 * gini_sum(&left, nl) + nr as f64 * gini_sum(&right, nr))
                    / n as f64;
                let gain = parent - child;
                if gain > GAIN_EPS && best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((feature, here + (next - here) / 2.0, gain));
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<u32>, rng: &mut ChaCha12Rng) -> usize {
        let counts = self.label_counts(&rows);
        if rows.len() < self.min_samples_split || gini_sum(&counts, rows.len()) <= GAIN_EPS {
            return self.leaf(&rows, &counts);
        }
        let candidates = self.draw_features(rng);
        let Some((feature, threshold, _)) = self.best_split(&rows, &counts, &candidates) else {
            return self.leaf(&rows, &counts);
        };
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&r| self.features.get(r as usize, feature) <= threshold);
        let cover = rows.len() as u32;
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            fractions: Vec::new(),
            cover,
        }); // placeholder
        let left = self.build(left_rows, rng);
        let right = self.build(right_rows, rng);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
        };
        slot
    }
}

/// Grow one tree on the given (possibly repeated) row sample.
pub fn grow_tree(
    features: &Matrix,
    labels: &LabelMatrix,
    rows: Vec<u32>,
    min_samples_split: usize,
    n_candidates: usize,
    rng: &mut ChaCha12Rng,
) -> Tree {
    let mut grower = Grower {
        features,
        labels,
        min_samples_split,
        n_candidates,
        nodes: Vec::new(),
    };
    let root = grower.build(rows, rng);
    debug_assert_eq!(root, 0);
    Tree {
        nodes: grower.nodes,
    }
}
