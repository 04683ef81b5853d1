//! The whole pipeline end to end on synthetic data: generate, extract
//! features, train all four strategies, evaluate, and read the metrics.
//!
//! This is the library-level equivalent of
//! `gannet synth ... && gannet run-all ...`.
//!
//! Run with:
//! ```bash
//! cargo run -p gannet --example full_pipeline
//! ```

use gannet::ingest::RunConfig;
use gannet::pipeline::{cmd_run_all, cmd_validate, InputPaths, PipelineOptions};
use gannet::synth::{generate, write_dataset, HierarchyShape, SynthSpec};

fn main() {
    let dir = std::env::temp_dir().join("gannet_example_pipeline");
    let _ = std::fs::remove_dir_all(&dir);

    let spec = SynthSpec {
        n_genes: 120,
        n_blocks: 3,
        in_block_edge_prob: 0.6,
        in_block_weight_range: (1.0, 5.0),
        cross_block_edge_prob: 0.02,
        hierarchy_shape: HierarchyShape::BinaryTree(8),
        signal: 0.6,
        noise: 0.05,
        seed: 7,
    };
    let data = generate(&spec).unwrap();
    let paths = write_dataset(&data, dir.join("data")).unwrap();
    println!("dataset under {}", dir.join("data").display());

    let cfg = RunConfig {
        cluster_counts: vec![2, 3, 5],
        folds: 3,
        min_genes_per_function: 5,
        min_functions_per_subhierarchy: 4,
        forest_trees: 60,
        forest_min_split: 5,
        selection_cutoff: 0.9,
        seed: 13,
    };
    let inputs = InputPaths {
        edges: paths.edges,
        annotations: paths.annotations,
        hierarchy: paths.hierarchy,
    };

    let summary = cmd_validate(&cfg, &inputs, false).unwrap();
    println!(
        "validated: {} genes, {} edges, {} terms, {} sub-hierarchies",
        summary.n_genes, summary.n_edges, summary.n_terms, summary.n_subhierarchies
    );
    print!("{}", summary.subhierarchy_table);

    let out = dir.join("run");
    let outputs = cmd_run_all(&cfg, &inputs, &out, &PipelineOptions::default()).unwrap();
    println!("\nmetrics from {}:", outputs.evaluation.metrics.display());
    let metrics = std::fs::read_to_string(&outputs.evaluation.metrics).unwrap();
    print!("{metrics}");

    // Re-running hits the digest cache and recomputes nothing.
    let again = cmd_run_all(&cfg, &inputs, &out, &PipelineOptions::default()).unwrap();
    println!(
        "second invocation: features cached = {}, predictions cached = {}",
        again.features.cached, again.predictions.cached
    );
}
