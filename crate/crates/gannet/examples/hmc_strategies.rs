//! The four hierarchical multi-label strategies and the consistency
//! propagation.
//!
//! lcn trains one binary classifier per non-root function; lcpn one
//! multi-label classifier per parent node over its children; lcl one per
//! level; global a single classifier over the whole sub-hierarchy. After
//! training, cumulative probabilities down the tree guarantee that no
//! child outranks its parent.
//!
//! Run with:
//! ```bash
//! cargo run -p gannet --example hmc_strategies
//! ```

use gannet::enrichment::{concat_features, enrich};
use gannet::graph::{build_affinity, Network};
use gannet::hmc::{plan, propagate, train_strategy, StrategyKind, TrainOptions};
use gannet::learn::{stratified_kfold, ForestParams, LabelMatrix};
use gannet::ontology::{
    filter_functions, split_subhierarchies, true_path_close, AnnotationMap, Hierarchy,
};
use gannet::spectral::{cluster_sweep, EigenOptions, GraphTag};
use gannet::synth::{generate, HierarchyShape, SynthSpec};

fn main() {
    let spec = SynthSpec {
        n_genes: 90,
        n_blocks: 3,
        in_block_edge_prob: 0.6,
        in_block_weight_range: (1.0, 5.0),
        cross_block_edge_prob: 0.02,
        hierarchy_shape: HierarchyShape::BinaryTree(7),
        signal: 0.6,
        noise: 0.05,
        seed: 21,
    };
    let data = generate(&spec).unwrap();
    let network = Network::from_edge_records(&data.edges).unwrap();
    let hierarchy = Hierarchy::from_records(&data.hierarchy).unwrap();
    let raw =
        AnnotationMap::from_pairs(&data.annotations, Some(network.genes()), hierarchy.terms())
            .unwrap();
    let closed = true_path_close(&raw, &hierarchy).unwrap();
    let (fh, fann) = filter_functions(&closed, &hierarchy, 3);
    let subs = split_subhierarchies(&fh, &fann, 4).unwrap();
    let sh = &subs[0];
    println!(
        "sub-hierarchy '{}': {} functions over {} genes, levels {}",
        sh.root_name(),
        sh.n_terms(),
        sh.gene_set.len(),
        sh.functions_per_level()
    );

    for strategy in StrategyKind::ALL {
        let p = plan(strategy, sh);
        let ids: Vec<&str> = p.units.iter().map(|u| u.id.as_str()).collect();
        println!("{strategy}: {} classifiers {ids:?}", p.units.len());
    }

    // Features for this sub-hierarchy: J_G' and J_F' sliced and joined.
    let affinity = build_affinity(&network, &closed).unwrap();
    let ks = [2usize, 3];
    let cg = cluster_sweep(&network, &ks, 1, GraphTag::G, &EigenOptions::default()).unwrap();
    let cf =
        cluster_sweep(affinity.network(), &ks, 1, GraphTag::F, &EigenOptions::default()).unwrap();
    let jg = enrich(&cg, &fann, fh.terms(), GraphTag::G).unwrap();
    let jf = enrich(&cf, &fann, fh.terms(), GraphTag::F).unwrap();
    let features = concat_features(
        &jg.slice(&sh.gene_set, &sh.terms).unwrap(),
        &jf.slice(&sh.gene_set, &sh.terms).unwrap(),
    )
    .unwrap();
    println!("\nfeature matrix for the sub-hierarchy: {} x {}", features.n_genes(), features.n_columns());

    // One fold plan shared by every strategy.
    let mut labels = LabelMatrix::zeros(sh.gene_set.len(), sh.n_terms() - 1);
    let mut j = 0;
    for t in 0..sh.n_terms() {
        if t == sh.root {
            continue;
        }
        for (g, gene) in sh.gene_set.iter().enumerate() {
            if fann.has(gene, &sh.terms[t]) {
                labels.set(g, j, true);
            }
        }
        j += 1;
    }
    let folds = stratified_kfold(&labels, 3, 77).unwrap();
    let opts = TrainOptions {
        forest: ForestParams {
            n_trees: 40,
            ..ForestParams::default()
        },
        selection_cutoff: 0.9,
        seed: 5,
    };

    for strategy in StrategyKind::ALL {
        let p = plan(strategy, sh);
        let (raw_table, _) = train_strategy(&p, sh, &features, &fann, &folds, &opts).unwrap();
        let table = propagate(raw_table, sh);
        // Count hierarchy violations: none may remain.
        let mut violations = 0;
        for g in 0..table.genes.len() {
            for t in 0..sh.n_terms() {
                if let Some(parent) = sh.parent_of[t] {
                    if table.get(g, t) > table.get(g, parent) + 1e-12 {
                        violations += 1;
                    }
                }
            }
        }
        let mean: f64 = (0..table.genes.len())
            .map(|g| table.get(g, sh.root))
            .sum::<f64>()
            / table.genes.len() as f64;
        println!(
            "{strategy}: out-of-fold predictions for {} genes, root prob {mean}, {violations} violations",
            table.genes.len()
        );
    }
    println!("\ncumulative propagation keeps every path monotone from root to leaf");
}
