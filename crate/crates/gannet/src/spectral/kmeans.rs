//! Seeded k-means with k-means++ initialization. Labels come out densely
//! relabeled (empty clusters leave no gaps) and the whole routine is
//! deterministic for a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::util::Matrix;

#[derive(Clone, Copy, Debug)]
pub struct KmeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            restarts: 10,
            max_iter: 300,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KmeansResult {
    /// Dense labels in [0, n_clusters).
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub n_clusters: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_centers(points: &Matrix, k: usize, rng: &mut ChaCha12Rng) -> Vec<Vec<f64>> {
    let n = points.n_rows();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points.row(rng.gen_range(0..n)).to_vec());
    let mut dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(points.row(next).to_vec());
        for i in 0..n {
            dist[i] = dist[i].min(sq_dist(points.row(i), centers.last().unwrap()));
        }
    }
    centers
}

fn lloyd(points: &Matrix, centers: &mut [Vec<f64>], max_iter: usize) -> (Vec<usize>, f64) {
    let n = points.n_rows();
    let d = points.n_cols();
    let k = centers.len();
    let mut labels = vec![0usize; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let row = points.row(i);
            let mut best = 0;
            let mut best_d = sq_dist(row, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let dd = sq_dist(row, center);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, &x) in sums[labels[i]].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
            // Empty clusters keep their previous center; they may stay empty.
        }
    }
    let inertia: f64 = (0..n)
        .map(|i| sq_dist(points.row(i), &centers[labels[i]]))
        .sum();
    (labels, inertia)
}

fn relabel_dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map: Vec<Option<usize>> = vec![None; labels.iter().max().map_or(0, |&m| m + 1)];
    let mut next = 0;
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let dense = *map[l].get_or_insert_with(|| {
            let v = next;
            next += 1;
            v
        });
        out.push(dense);
    }
    (out, next)
}

/// Cluster rows of `points` into at most `k` groups, keeping the best
/// inertia over the configured restarts.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, opts: KmeansOptions) -> KmeansResult {
    assert!(k >= 1 && k <= points.n_rows(), "k must be in [1, n_points]");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..opts.restarts.max(1) {
        let mut centers = plus_plus_centers(points, k, &mut rng);
        let (labels, inertia) = lloyd(points, &mut centers, opts.max_iter);
        if best.as_ref().map_or(true, |(bi, _)| inertia < *bi) {
            best = Some((inertia, labels));
        }
    }
    let (inertia, labels) = best.expect("at least one restart runs");
    let (labels, n_clusters) = relabel_dense(&labels);
    KmeansResult {
        labels,
        inertia,
        n_clusters,
    }
}
