//! The co-expression network and the annotation-enriched affinity graph.
//!
//! Affinity re-weights every edge as the mean of the normalized
//! co-expression weight and the fraction of functions the two genes share.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::ingest::EdgeRecord;
use crate::ontology::AnnotationMap;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("all edge weights equal 1; the normalized co-expression term is undefined")]
    DegenerateWeights,
    #[error("unknown gene '{gene}'")]
    UnknownGene { gene: String },
    #[error("no edge between '{gene_a}' and '{gene_b}'")]
    MissingEdge { gene_a: String, gene_b: String },
    #[error("edge weight {weight} below 1")]
    SubThresholdWeight { weight: f64 },
}

/// Weighted undirected gene graph with a canonical (sorted) node order.
#[derive(Clone, Debug)]
pub struct Network {
    genes: Vec<String>,
    neighbors: Vec<Vec<(usize, f64)>>,
    n_edges: usize,
    max_weight: f64,
}

impl Network {
    pub fn from_edge_records(records: &[EdgeRecord]) -> Result<Self, GraphError> {
        let mut genes: Vec<String> = records
            .iter()
            .flat_map(|r| [r.gene_a.clone(), r.gene_b.clone()])
            .collect();
        genes.sort();
        genes.dedup();
        let index: HashMap<&str, usize> = genes
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let mut neighbors = vec![Vec::new(); genes.len()];
        let mut max_weight = f64::NEG_INFINITY;
        for r in records {
            if r.weight < 1.0 {
                return Err(GraphError::SubThresholdWeight { weight: r.weight });
            }
            let a = index[r.gene_a.as_str()];
            let b = index[r.gene_b.as_str()];
            neighbors[a].push((b, r.weight));
            neighbors[b].push((a, r.weight));
            max_weight = max_weight.max(r.weight);
        }
        for list in &mut neighbors {
            list.sort_unstable_by(|x, y| x.0.cmp(&y.0));
        }
        Ok(Network {
            genes,
            neighbors,
            n_edges: records.len(),
            max_weight: if records.is_empty() { 0.0 } else { max_weight },
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn gene_ix(&self, name: &str) -> Option<usize> {
        self.genes.binary_search_by(|g| g.as_str().cmp(name)).ok()
    }

    pub fn max_weight(&self) -> f64 {
        self.max_weight
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.neighbors[node]
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.neighbors[a]
            .binary_search_by(|&(n, _)| n.cmp(&b))
            .ok()
            .map(|pos| self.neighbors[a][pos].1)
    }

    pub fn weighted_degree(&self, node: usize) -> f64 {
        self.neighbors[node].iter().map(|&(_, w)| w).sum()
    }

    /// Iterate each undirected edge once, with node indexes a < b.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.neighbors.iter().enumerate().flat_map(|(a, list)| {
            list.iter()
                .filter(move |&&(b, _)| a < b)
                .map(move |&(b, w)| (a, b, w))
        })
    }

    /// Induced subgraph on the given genes; `max_weight` is recomputed.
    pub fn subgraph(&self, genes: &[String]) -> Result<Network, GraphError> {
        let mut keep: Vec<usize> = Vec::with_capacity(genes.len());
        for g in genes {
            let ix = self
                .gene_ix(g)
                .ok_or_else(|| GraphError::UnknownGene { gene: g.clone() })?;
            keep.push(ix);
        }
        keep.sort_unstable();
        keep.dedup();
        let remap: HashMap<usize, usize> = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let kept_genes: Vec<String> = keep.iter().map(|&ix| self.genes[ix].clone()).collect();
        let mut neighbors = vec![Vec::new(); keep.len()];
        let mut n_edges = 0;
        let mut max_weight = f64::NEG_INFINITY;
        for (new_a, &old_a) in keep.iter().enumerate() {
            for &(old_b, w) in &self.neighbors[old_a] {
                if let Some(&new_b) = remap.get(&old_b) {
                    neighbors[new_a].push((new_b, w));
                    if new_a < new_b {
                        n_edges += 1;
                        max_weight = max_weight.max(w);
                    }
                }
            }
        }
        Ok(Network {
            genes: kept_genes,
            neighbors,
            n_edges,
            max_weight: if n_edges == 0 { 0.0 } else { max_weight },
        })
    }

    /// Serialize in the edges.tsv layout (used by the affinity export).
    pub fn to_edges_tsv(&self) -> String {
        let mut out = String::new();
        for (a, b, w) in self.edges() {
            writeln!(out, "{}\t{}\t{}", self.genes[a], self.genes[b], w).unwrap();
        }
        out
    }
}

/// Same shape as `Network`, with every weight mapped into [0, 1].
#[derive(Clone, Debug)]
pub struct AffinityNetwork {
    net: Network,
}

impl AffinityNetwork {
    pub fn network(&self) -> &Network {
        &self.net
    }
}

/// Orientation of the shared-function ratio in the affinity weight.
///
/// The printed formula divides the union by the intersection, which is at
/// least 1 whenever defined and cannot land in [0, 1]; the default uses the
/// intersection-over-union similarity, which does. The literal variant is
/// kept for side-by-side inspection only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OverlapOrientation {
    #[default]
    IntersectionOverUnion,
    UnionOverIntersection,
}

fn overlap_ratio(a: &[usize], b: &[usize], orientation: OverlapOrientation) -> f64 {
    let mut inter = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    match orientation {
        OverlapOrientation::IntersectionOverUnion => {
            if union == 0 {
                // Neither gene carries any function: no evidence of sharing.
                0.0
            } else {
                inter as f64 / union as f64
            }
        }
        OverlapOrientation::UnionOverIntersection => {
            if inter == 0 {
                if union == 0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                union as f64 / inter as f64
            }
        }
    }
}

fn ann_terms<'a>(ann: &'a AnnotationMap, gene: &str) -> &'a [usize] {
    ann.gene_ix(gene).map_or(&[], |g| ann.terms_of_gene(g))
}

/// Affinity weight of one existing edge:
/// `((w - 1) / (max_w - 1) + shared-function ratio) / 2`.
pub fn affinity_weight(
    net: &Network,
    ann: &AnnotationMap,
    gene_a: &str,
    gene_b: &str,
) -> Result<f64, GraphError> {
    affinity_weight_with(net, ann, gene_a, gene_b, OverlapOrientation::default())
}

pub fn affinity_weight_with(
    net: &Network,
    ann: &AnnotationMap,
    gene_a: &str,
    gene_b: &str,
    orientation: OverlapOrientation,
) -> Result<f64, GraphError> {
    let a = net
        .gene_ix(gene_a)
        .ok_or_else(|| GraphError::UnknownGene { gene: gene_a.into() })?;
    let b = net
        .gene_ix(gene_b)
        .ok_or_else(|| GraphError::UnknownGene { gene: gene_b.into() })?;
    let w = net.weight(a, b).ok_or_else(|| GraphError::MissingEdge {
        gene_a: gene_a.into(),
        gene_b: gene_b.into(),
    })?;
    if net.max_weight() <= 1.0 {
        return Err(GraphError::DegenerateWeights);
    }
    let coexpr = (w - 1.0) / (net.max_weight() - 1.0);
    let shared = overlap_ratio(ann_terms(ann, gene_a), ann_terms(ann, gene_b), orientation);
    Ok(0.5 * (coexpr + shared))
}

/// Re-weight every edge of the network with `affinity_weight`.
pub fn build_affinity(net: &Network, ann: &AnnotationMap) -> Result<AffinityNetwork, GraphError> {
    build_affinity_with(net, ann, OverlapOrientation::default())
}

pub fn build_affinity_with(
    net: &Network,
    ann: &AnnotationMap,
    orientation: OverlapOrientation,
) -> Result<AffinityNetwork, GraphError> {
    if net.max_weight() <= 1.0 {
        return Err(GraphError::DegenerateWeights);
    }
    // Resolve each network gene in the annotation universe once.
    let ann_ix: Vec<Option<usize>> = net.genes().iter().map(|g| ann.gene_ix(g)).collect();
    let empty: &[usize] = &[];
    let scale = net.max_weight() - 1.0;
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.n_nodes()];
    let mut max_weight = f64::NEG_INFINITY;
    for (a, b, w) in net.edges() {
        let ta = ann_ix[a].map_or(empty, |g| ann.terms_of_gene(g));
        let tb = ann_ix[b].map_or(empty, |g| ann.terms_of_gene(g));
        let wf = 0.5 * ((w - 1.0) / scale + overlap_ratio(ta, tb, orientation));
        neighbors[a].push((b, wf));
        neighbors[b].push((a, wf));
        max_weight = max_weight.max(wf);
    }
    for list in &mut neighbors {
        list.sort_unstable_by(|x, y| x.0.cmp(&y.0));
    }
    Ok(AffinityNetwork {
        net: Network {
            genes: net.genes().to_vec(),
            neighbors,
            n_edges: net.n_edges(),
            max_weight: if net.n_edges() == 0 { 0.0 } else { max_weight },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AnnotationRecord;

    fn net(edges: &[(&str, &str, f64)]) -> Network {
        let recs: Vec<EdgeRecord> = edges
            .iter()
            .map(|(a, b, w)| EdgeRecord {
                gene_a: a.to_string(),
                gene_b: b.to_string(),
                weight: *w,
            })
            .collect();
        Network::from_edge_records(&recs).unwrap()
    }

    fn ann(pairs: &[(&str, &str)]) -> AnnotationMap {
        let recs: Vec<AnnotationRecord> = pairs
            .iter()
            .map(|(g, t)| AnnotationRecord {
                gene: g.to_string(),
                term: t.to_string(),
            })
            .collect();
        let mut terms: Vec<String> = pairs.iter().map(|(_, t)| t.to_string()).collect();
        terms.sort();
        terms.dedup();
        AnnotationMap::from_pairs(&recs, None, &terms).unwrap()
    }

    #[test]
    fn affinity_extremes() {
        let n = net(&[("u", "v", 5.0), ("u", "w", 1.0)]);
        let a = ann(&[("u", "a"), ("u", "b"), ("v", "a"), ("v", "b")]);
        // Max weight and identical annotation sets.
        assert_eq!(affinity_weight(&n, &a, "u", "v").unwrap(), 1.0);
        // Threshold weight and disjoint sets.
        let b = ann(&[("u", "a"), ("w", "b")]);
        assert_eq!(affinity_weight(&n, &b, "u", "w").unwrap(), 0.0);
    }

    #[test]
    fn affinity_mid_formula() {
        // w = 3, max = 5, intersection 1, union 3.
        let n = net(&[("u", "v", 3.0), ("x", "y", 5.0)]);
        let a = ann(&[("u", "a"), ("u", "b"), ("v", "a"), ("v", "c")]);
        let got = affinity_weight(&n, &a, "u", "v").unwrap();
        assert!((got - 0.5 * (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!((got - 0.41666666666666663).abs() < 1e-12);
    }

    #[test]
    fn affinity_is_symmetric_and_bounded() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n_genes = rng.gen_range(3..10);
            let names: Vec<String> = (0..n_genes).map(|i| format!("g{i}")).collect();
            let mut edges = Vec::new();
            for i in 0..n_genes {
                for j in i + 1..n_genes {
                    if rng.gen_bool(0.6) {
                        edges.push(EdgeRecord {
                            gene_a: names[i].clone(),
                            gene_b: names[j].clone(),
                            weight: 1.0 + rng.gen_range(0.0..4.0),
                        });
                    }
                }
            }
            if edges.is_empty() {
                continue;
            }
            let network = Network::from_edge_records(&edges).unwrap();
            if network.max_weight() <= 1.0 {
                continue;
            }
            let mut pairs = Vec::new();
            for name in &names {
                for t in 0..3 {
                    if rng.gen_bool(0.5) {
                        pairs.push((name.clone(), format!("t{t}")));
                    }
                }
            }
            let recs: Vec<AnnotationRecord> = pairs
                .iter()
                .map(|(g, t)| AnnotationRecord {
                    gene: g.clone(),
                    term: t.clone(),
                })
                .collect();
            let terms = vec!["t0".to_string(), "t1".to_string(), "t2".to_string()];
            let amap = AnnotationMap::from_pairs(&recs, None, &terms).unwrap();
            let aff = build_affinity(&network, &amap).unwrap();
            for (i, j, w) in aff.network().edges() {
                assert!((0.0..=1.0).contains(&w), "weight {w} out of range");
                let gi = &network.genes()[i];
                let gj = &network.genes()[j];
                let forward = affinity_weight(&network, &amap, gi, gj).unwrap();
                let backward = affinity_weight(&network, &amap, gj, gi).unwrap();
                assert_eq!(forward, backward);
                assert_eq!(forward, w);
            }
        }
    }

    #[test]
    fn affinity_monotone_in_weight() {
        let a = ann(&[("u", "a"), ("v", "b")]);
        let mut last = -1.0;
        for w in [1.0, 2.0, 3.0, 4.0] {
            let n = net(&[("u", "v", w), ("x", "y", 5.0)]);
            let got = affinity_weight(&n, &a, "u", "v").unwrap();
            assert!(got >= last);
            last = got;
        }
    }

    #[test]
    fn degenerate_weights_rejected() {
        let n = net(&[("u", "v", 1.0)]);
        let a = ann(&[("u", "a")]);
        assert!(matches!(
            affinity_weight(&n, &a, "u", "v"),
            Err(GraphError::DegenerateWeights)
        ));
        assert!(matches!(
            build_affinity(&n, &a),
            Err(GraphError::DegenerateWeights)
        ));
    }

    #[test]
    fn no_shared_annotations_halves_the_coexpression_term() {
        let n = net(&[("u", "v", 3.0), ("x", "y", 5.0)]);
        let a = ann(&[("u", "a"), ("v", "b")]);
        let aff = build_affinity(&n, &a).unwrap();
        let u = aff.network().gene_ix("u").unwrap();
        let v = aff.network().gene_ix("v").unwrap();
        assert_eq!(aff.network().weight(u, v).unwrap(), 0.5 * (2.0 / 4.0));
    }

    #[test]
    fn literal_orientation_exceeds_one() {
        let n = net(&[("u", "v", 5.0)]);
        let a = ann(&[("u", "a"), ("u", "b"), ("v", "a")]);
        let got =
            affinity_weight_with(&n, &a, "u", "v", OverlapOrientation::UnionOverIntersection)
                .unwrap();
        assert!(got > 1.0);
    }

    #[test]
    fn subgraph_cases() {
        let n = net(&[("u", "v", 2.0), ("v", "w", 3.0), ("u", "w", 4.0)]);
        let full = n.subgraph(n.genes()).unwrap();
        assert_eq!(full.n_edges(), 3);
        assert_eq!(full.max_weight(), 4.0);

        let single = n.subgraph(&["u".to_string()]).unwrap();
        assert_eq!(single.n_nodes(), 1);
        assert_eq!(single.n_edges(), 0);

        let pair = n.subgraph(&["u".to_string(), "v".to_string()]).unwrap();
        assert_eq!(pair.n_edges(), 1);
        assert_eq!(pair.max_weight(), 2.0);

        assert!(matches!(
            n.subgraph(&["zz".to_string()]),
            Err(GraphError::UnknownGene { .. })
        ));
    }

    #[test]
    fn gene_index_is_order_independent() {
        let forward = net(&[("u", "v", 2.0), ("a", "v", 3.0), ("a", "z", 4.0)]);
        let reversed = net(&[("a", "z", 4.0), ("a", "v", 3.0), ("v", "u", 2.0)]);
        assert_eq!(forward.genes(), reversed.genes());
        assert_eq!(
            forward.edges().collect::<Vec<_>>(),
            reversed.edges().collect::<Vec<_>>()
        );
    }

    #[test]
    fn nested_subgraphs_compose() {
        let n = net(&[
            ("a", "b", 2.0),
            ("b", "c", 3.0),
            ("c", "d", 4.0),
            ("a", "d", 5.0),
        ]);
        let outer: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let inner: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let two_step = n.subgraph(&outer).unwrap().subgraph(&inner).unwrap();
        let one_step = n.subgraph(&inner).unwrap();
        assert_eq!(two_step.genes(), one_step.genes());
        assert_eq!(
            two_step.edges().collect::<Vec<_>>(),
            one_step.edges().collect::<Vec<_>>()
        );
    }
}
