//! Build the annotation-enriched affinity graph.
//!
//! Every edge weight becomes the mean of two terms in [0, 1]: the
//! co-expression weight rescaled by (w - 1) / (max_w - 1), and the fraction
//! of functions the two genes share (intersection over union of their
//! annotation sets).
//!
//! Run with:
//! ```bash
//! cargo run -p gannet --example affinity_graph
//! ```

use gannet::graph::{affinity_weight, build_affinity, Network};
use gannet::ingest::{AnnotationRecord, EdgeRecord};
use gannet::ontology::AnnotationMap;

fn main() {
    let edges = vec![
        edge("atp1", "atp2", 5.0),
        edge("atp1", "hsp1", 3.0),
        edge("atp2", "hsp1", 1.0),
        edge("hsp1", "hsp2", 4.5),
    ];
    let network = Network::from_edge_records(&edges).unwrap();

    // atp1/atp2 share both functions; hsp1/hsp2 share one.
    let pairs = [
        ("atp1", "energy"),
        ("atp1", "transport"),
        ("atp2", "energy"),
        ("atp2", "transport"),
        ("hsp1", "stress"),
        ("hsp2", "stress"),
        ("hsp2", "transport"),
    ];
    let records: Vec<AnnotationRecord> = pairs
        .iter()
        .map(|(g, t)| AnnotationRecord {
            gene: g.to_string(),
            term: t.to_string(),
        })
        .collect();
    let terms = vec!["energy".into(), "stress".into(), "transport".into()];
    let ann = AnnotationMap::from_pairs(&records, Some(network.genes()), &terms).unwrap();

    println!("max co-expression weight: {}", network.max_weight());
    println!("\nedge                 w      affinity");
    for (a, b, w) in network.edges() {
        let ga = &network.genes()[a];
        let gb = &network.genes()[b];
        let wf = affinity_weight(&network, &ann, ga, gb).unwrap();
        println!("{ga:>5} -- {gb:<10} {w:<6} {wf:.4}");
    }

    let affinity = build_affinity(&network, &ann).unwrap();
    println!("\nfull affinity graph (same edge set, weights in [0, 1]):");
    print!("{}", affinity.network().to_edges_tsv());

    // The strongest pair: max weight and identical annotation sets.
    let top = affinity_weight(&network, &ann, "atp1", "atp2").unwrap();
    println!("atp1--atp2 reaches {top}: max co-expression plus identical annotations");
}

fn edge(a: &str, b: &str, weight: f64) -> EdgeRecord {
    EdgeRecord {
        gene_a: a.to_string(),
        gene_b: b.to_string(),
        weight,
    }
}
