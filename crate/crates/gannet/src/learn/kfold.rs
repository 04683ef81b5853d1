//! Iterative stratification for multi-label k-fold splits: labels are
//! processed rarest first and each positive instance lands in the fold with
//! the greatest remaining demand for that label. Fold sizes are capped so
//! the partition stays balanced to within one sample.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{LabelMatrix, LearnError};

/// Per-sample fold assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub fold_of: Vec<usize>,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&r| self.fold_of[r] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&r| self.fold_of[r] != fold)
            .collect()
    }
}

pub fn stratified_kfold(
    labels: &LabelMatrix,
    n_folds: usize,
    seed: u64,
) -> Result<FoldPlan, LearnError> {
    let n = labels.n_rows();
    if n_folds > n || n_folds < 2 {
        return Err(LearnError::TooFewSamples {
            folds: n_folds,
            samples: n,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut capacity: Vec<usize> = (0..n_folds)
        .map(|f| n / n_folds + usize::from(f < n % n_folds))
        .collect();
    // Remaining desired positives per (label, fold).
    let positives = labels.positives_per_label();
    let mut demand: Vec<Vec<f64>> = positives
        .iter()
        .map(|&p| vec![p as f64 / n_folds as f64; n_folds])
        .collect();
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut remaining_per_label: Vec<usize> = positives.clone();

    loop {
        // Rarest label with unassigned positives left, ties to the lowest index.
        let target = (0..labels.n_labels())
            .filter(|&l| remaining_per_label[l] > 0)
            .min_by_key(|&l| (remaining_per_label[l], l));
        let Some(label) = target else { break };
        let mut rows: Vec<usize> = (0..n)
            .filter(|&r| assigned[r].is_none() && labels.get(r, label))
            .collect();
        rows.shuffle(&mut rng);
        for row in rows {
            let open: Vec<usize> = (0..n_folds).filter(|&f| capacity[f] > 0).collect();
            debug_assert!(!open.is_empty(), "capacities sum to n");
            let best_demand = open
                .iter()
                .map(|&f| demand[label][f])
                .fold(f64::NEG_INFINITY, f64::max);
            let tied: Vec<usize> = open
                .iter()
                .copied()
                .filter(|&f| demand[label][f] == best_demand)
                .collect();
            let fold = if tied.len() == 1 {
                tied[0]
            } else {
                // Secondary criterion: most total capacity left; final ties
                // resolved by the seeded stream.
                let most = tied.iter().map(|&f| capacity[f]).max().unwrap();
                let finalists: Vec<usize> =
                    tied.into_iter().filter(|&f| capacity[f] == most).collect();
                finalists[rng.gen_range(0..finalists.len())]
            };
            assigned[row] = Some(fold);
            capacity[fold] -= 1;
            for l in 0..labels.n_labels() {
                if labels.get(row, l) {
                    demand[l][fold] -= 1.0;
                    remaining_per_label[l] -= 1;
                }
            }
        }
    }
    // Rows with no positive labels: spread by remaining capacity.
    let mut rest: Vec<usize> = (0..n).filter(|&r| assigned[r].is_none()).collect();
    rest.shuffle(&mut rng);
    for row in rest {
        let fold = (0..n_folds)
            .max_by_key(|&f| (capacity[f], std::cmp::Reverse(f)))
            .unwrap();
        assigned[row] = Some(fold);
        capacity[fold] -= 1;
    }
    Ok(FoldPlan {
        n_folds,
        fold_of: assigned.into_iter().map(Option::unwrap).collect(),
    })
}
