//! Train a multi-output random forest, attribute its predictions with
//! TreeSHAP, and select features with the cumulative importance cutoff.
//!
//! Run with:
//! ```bash
//! cargo run -p gannet --example forest_and_shap
//! ```

use gannet::explain::{mean_abs_importance, select_features, tree_shap};
use gannet::learn::{fit, predict_proba, ForestParams, LabelMatrix};
use gannet::util::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() {
    // 120 samples, 6 features. Feature 0 drives label A, feature 1 drives
    // label B, the rest is noise.
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..120)
        .map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let features = Matrix::from_rows(rows);
    let labels = LabelMatrix::from_rows(
        (0..120)
            .map(|r| vec![features.get(r, 0) > 0.5, features.get(r, 1) > 0.6])
            .collect(),
    );

    let params = ForestParams {
        n_trees: 80,
        seed: 11,
        ..ForestParams::default()
    };
    let label_ids = vec!["label_a".to_string(), "label_b".to_string()];
    let names: Vec<String> = (0..6).map(|f| format!("feat{f}")).collect();
    let forest = fit(&features, &labels, &label_ids, &names, &params).unwrap();
    let probs = predict_proba(&forest, &features).unwrap();

    let correct = (0..120)
        .filter(|&r| {
            (probs.get(r, 0) > 0.5) == labels.get(r, 0)
                && (probs.get(r, 1) > 0.5) == labels.get(r, 1)
        })
        .count();
    println!("training-set accuracy: {correct}/120 rows on both labels");

    let att = tree_shap(&forest, &features).unwrap();
    println!("\nbase values (expected output per label): {:?}", att.base_values);
    // Local accuracy on a single instance.
    let total: f64 = (0..6).map(|f| att.get(0, f, 0)).sum();
    println!(
        "instance 0 / label_a: base {:.4} + sum(attributions) {:.4} = prediction {:.4}",
        att.base_values[0],
        total,
        probs.get(0, 0)
    );

    let importance = mean_abs_importance(&att);
    println!("\nmean |SHAP| per feature:");
    for (name, imp) in names.iter().zip(&importance) {
        println!("  {name}: {imp:.5}");
    }

    for cutoff in [0.5, 0.9, 1.0] {
        let sel = select_features(&importance, cutoff).unwrap();
        let picked: Vec<&str> = sel
            .selected_columns
            .iter()
            .map(|&c| names[c].as_str())
            .collect();
        println!("cutoff {cutoff}: theta = {} -> {picked:?}", sel.theta);
    }
    println!("\nfeat0 and feat1 dominate, so small cutoffs select just those two");

    // Models round-trip through the versioned JSON dump bit for bit.
    let restored = gannet::learn::Forest::from_json(&forest.to_json()).unwrap();
    assert_eq!(restored, forest);
    println!("model file round-trips exactly");
}
