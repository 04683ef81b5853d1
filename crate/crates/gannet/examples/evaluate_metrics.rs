//! Precision-recall evaluation on a hand-checkable fixture.
//!
//! Micro-averaging pools true/false positives over every (gene, function)
//! pair; macro-averaging scores each function separately and averages the
//! areas, optionally weighted by how many genes carry each function.
//!
//! Run with:
//! ```bash
//! cargo run -p gannet --example evaluate_metrics
//! ```

use gannet::eval::{auc, evaluate_table, micro_curve, per_function_auprc};
use gannet::hmc::PredictionTable;
use gannet::ingest::AnnotationRecord;
use gannet::ontology::AnnotationMap;

fn main() {
    // Truth: g1 carries a and b, g2 carries a. Root is never scored.
    let truth_pairs = [("g1", "a"), ("g1", "b"), ("g2", "a")];
    let records: Vec<AnnotationRecord> = truth_pairs
        .iter()
        .map(|(g, t)| AnnotationRecord {
            gene: g.to_string(),
            term: t.to_string(),
        })
        .collect();
    let genes = vec!["g1".to_string(), "g2".to_string()];
    let terms = vec!["a".to_string(), "b".to_string(), "root".to_string()];
    let truth = AnnotationMap::from_pairs(&records, Some(&genes), &terms).unwrap();

    let mut pred = PredictionTable::new("root".into(), "global".into(), genes, terms);
    pred.set(0, 0, 0.9); // g1, a   (true)
    pred.set(0, 1, 0.8); // g1, b   (true)
    pred.set(1, 0, 0.7); // g2, a   (true)
    pred.set(1, 1, 0.3); // g2, b   (false)
    pred.set(0, 2, 1.0);
    pred.set(1, 2, 1.0);

    let curve = micro_curve(&pred, &truth).unwrap();
    println!("micro PR curve (threshold, recall, precision):");
    for (t, (r, p)) in curve.thresholds.iter().zip(&curve.points) {
        println!("  {t:<4} {r:.4} {p:.4}");
    }
    println!("area under the pooled curve: {}", auc(&curve));
    println!("(every true pair outranks the false one, so the area is exactly 1)");

    println!("\nper-function areas:");
    for term in ["a", "b"] {
        println!("  {term}: {}", per_function_auprc(&pred, &truth, term).unwrap());
    }

    let report = evaluate_table(&pred, &truth).unwrap();
    println!("\nmicro          = {}", report.micro_auprc);
    println!("macro          = {}", report.macro_auprc);
    println!("macro weighted = {}", report.weighted_macro_auprc);
    println!("weights        = {:?}", report.weights);

    // A deliberately wrong ranking for one function.
    let mut flipped = pred.clone();
    flipped.set(0, 1, 0.1); // true pair now ranked below the false one
    let report = evaluate_table(&flipped, &truth).unwrap();
    println!("\nafter demoting the true (g1, b) pair:");
    println!("micro          = {:.4}", report.micro_auprc);
    println!("macro          = {:.4}", report.macro_auprc);
    println!("macro weighted = {:.4}", report.weighted_macro_auprc);
}
