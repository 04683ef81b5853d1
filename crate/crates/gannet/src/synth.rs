//! Deterministic synthetic datasets: weighted planted-partition networks
//! plus hierarchy-consistent annotations, so every pipeline stage can be
//! exercised and scored against a known plant.
//!
//! In-block edges draw weights from the configured range; cross-block edges
//! sit at the threshold weight 1. Annotations are generated top-down on the
//! hierarchy (closure holds by construction); noise flips only leaf-term
//! memberships and the map is re-closed afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    write_annotations, write_edges, write_hierarchy, AnnotationRecord, EdgeRecord,
    HierarchyEdgeRecord,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible synthetic spec: {reason}")]
    InfeasibleSpec { reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Shape of the generated function hierarchy.
#[derive(Clone, Debug, PartialEq)]
pub enum HierarchyShape {
    /// t0 <- t1 <- ... a single path.
    Chain(usize),
    /// t0 with n-1 direct children.
    Star(usize),
    /// Complete binary tree in breadth-first order.
    BinaryTree(usize),
    /// Explicit (child, parent) pairs.
    Custom(Vec<(String, String)>),
}

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub n_genes: usize,
    pub n_blocks: usize,
    /// Probability of an edge inside a block (the in-block density).
    pub in_block_edge_prob: f64,
    /// Weight range for in-block edges; both ends at least 1.
    pub in_block_weight_range: (f64, f64),
    pub cross_block_edge_prob: f64,
    pub hierarchy_shape: HierarchyShape,
    /// Probability that a child term inherits each of its parent's blocks.
    pub signal: f64,
    /// Per-(gene, leaf term) membership flip rate.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_genes: 60,
            n_blocks: 3,
            in_block_edge_prob: 0.6,
            in_block_weight_range: (1.0, 5.0),
            cross_block_edge_prob: 0.02,
            hierarchy_shape: HierarchyShape::Chain(4),
            signal: 0.7,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let err = |reason: &str| {
            Err(SynthError::InfeasibleSpec {
                reason: reason.to_string(),
            })
        };
        if self.n_genes < 2 {
            return err("need at least 2 genes");
        }
        if self.n_blocks == 0 || self.n_blocks > self.n_genes {
            return err("blocks must be in [1, n_genes]");
        }
        if !(0.0..=1.0).contains(&self.in_block_edge_prob)
            || !(0.0..=1.0).contains(&self.cross_block_edge_prob)
            || !(0.0..=1.0).contains(&self.signal)
            || !(0.0..=1.0).contains(&self.noise)
        {
            return err("probabilities must lie in [0, 1]");
        }
        let (lo, hi) = self.in_block_weight_range;
        if lo < 1.0 || hi < lo {
            return err("in-block weights must satisfy 1 <= lo <= hi");
        }
        if let HierarchyShape::Chain(n) | HierarchyShape::Star(n) | HierarchyShape::BinaryTree(n) =
            self.hierarchy_shape
        {
            if n < 2 {
                return err("hierarchy needs at least 2 terms");
            }
        }
        Ok(())
    }
}

/// The ground truth behind a generated dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Plant {
    pub seed: u64,
    /// Block id per gene.
    pub block_of: BTreeMap<String, usize>,
    /// Planted (pre-noise) gene sets per term.
    pub term_genes: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub edges: Vec<EdgeRecord>,
    pub annotations: Vec<AnnotationRecord>,
    pub hierarchy: Vec<HierarchyEdgeRecord>,
    pub plant: Plant,
}

fn term_names(n: usize) -> Vec<String> {
    let width = (n.max(2) - 1).to_string().len();
    (0..n).map(|i| format!("t{i:0width$}")).collect()
}

fn hierarchy_edges(shape: &HierarchyShape) -> Vec<(String, String)> {
    match shape {
        HierarchyShape::Chain(n) => {
            let names = term_names(*n);
            (1..*n).map(|i| (names[i].clone(), names[i - 1].clone())).collect()
        }
        HierarchyShape::Star(n) => {
            let names = term_names(*n);
            (1..*n).map(|i| (names[i].clone(), names[0].clone())).collect()
        }
        HierarchyShape::BinaryTree(n) => {
            let names = term_names(*n);
            (1..*n).map(|i| (names[i].clone(), names[(i - 1) / 2].clone())).collect()
        }
        HierarchyShape::Custom(edges) => edges.clone(),
    }
}

/// Generate a dataset. Identical specs produce identical data.
pub fn generate(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let width = (spec.n_genes - 1).to_string().len();
    let genes: Vec<String> = (0..spec.n_genes).map(|i| format!("g{i:0width$}")).collect();
    // Contiguous blocks with sizes differing by at most one.
    let base = spec.n_genes / spec.n_blocks;
    let extra = spec.n_genes % spec.n_blocks;
    let mut block_of: Vec<usize> = Vec::with_capacity(spec.n_genes);
    for b in 0..spec.n_blocks {
        let size = base + usize::from(b < extra);
        block_of.extend(std::iter::repeat(b).take(size));
    }

    // Network.
    let (lo, hi) = spec.in_block_weight_range;
    let mut edges: Vec<EdgeRecord> = Vec::new();
    let mut degree = vec![0usize; spec.n_genes];
    for i in 0..spec.n_genes {
        for j in (i + 1)..spec.n_genes {
            let same = block_of[i] == block_of[j];
            let p = if same { spec.in_block_edge_prob } else { spec.cross_block_edge_prob };
            if p > 0.0 && rng.gen_bool(p) {
                let weight = if same {
                    if hi > lo { rng.gen_range(lo..=hi) } else { lo }
                } else {
                    1.0
                };
                edges.push(EdgeRecord {
                    gene_a: genes[i].clone(),
                    gene_b: genes[j].clone(),
                    weight,
                });
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    // No gene may end up isolated: tie it to the next gene in its block
    // (or the next gene overall for singleton blocks).
    for i in 0..spec.n_genes {
        if degree[i] > 0 {
            continue;
        }
        let mut partner = None;
        for j in 0..spec.n_genes {
            if j != i && block_of[j] == block_of[i] {
                partner = Some(j);
                break;
            }
        }
        let j = partner.unwrap_or((i + 1) % spec.n_genes);
        let (a, b) = (i.min(j), i.max(j));
        edges.push(EdgeRecord {
            gene_a: genes[a].clone(),
            gene_b: genes[b].clone(),
            weight: hi,
        });
        degree[a] += 1;
        degree[b] += 1;
    }
    // The affinity construction needs max(w) > 1 somewhere.
    if hi > 1.0 && edges.iter().all(|e| e.weight <= 1.0) {
        edges[0].weight = hi;
    }
    edges.sort_by(|a, b| (&a.gene_a, &a.gene_b).cmp(&(&b.gene_a, &b.gene_b)));

    // Hierarchy and planted block sets, top-down in topological order.
    let h_edges = hierarchy_edges(&spec.hierarchy_shape);
    let mut names: Vec<String> = h_edges
        .iter()
        .flat_map(|(c, p)| [c.clone(), p.clone()])
        .collect();
    names.sort();
    names.dedup();
    let ix: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
    for (c, p) in &h_edges {
        parents[ix[c.as_str()]].push(ix[p.as_str()]);
        children[ix[p.as_str()]].push(ix[c.as_str()]);
    }
    for list in parents.iter_mut().chain(children.iter_mut()) {
        list.sort_unstable();
        list.dedup();
    }
    // Canonical topological order (smallest index first).
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..names.len()).filter(|&t| indegree[t] == 0).collect();
    if ready.is_empty() {
        return Err(SynthError::InfeasibleSpec {
            reason: "custom hierarchy has no root".into(),
        });
    }
    let mut topo = Vec::with_capacity(names.len());
    while let Some(&t) = ready.iter().next() {
        ready.remove(&t);
        topo.push(t);
        for &c in &children[t] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if topo.len() != names.len() {
        return Err(SynthError::InfeasibleSpec {
            reason: "custom hierarchy contains a cycle".into(),
        });
    }

    let all_blocks: BTreeSet<usize> = (0..spec.n_blocks).collect();
    let mut blocks_of_term: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); names.len()];
    for &t in &topo {
        if parents[t].is_empty() {
            blocks_of_term[t] = all_blocks.clone();
            continue;
        }
        // Closure demands the gene set stay inside every parent's.
        let mut inherit = blocks_of_term[parents[t][0]].clone();
        for &p in &parents[t][1..] {
            inherit = inherit.intersection(&blocks_of_term[p]).copied().collect();
        }
        let kept: BTreeSet<usize> = inherit
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(spec.signal))
            .collect();
        blocks_of_term[t] = if kept.is_empty() && !inherit.is_empty() {
            let pool: Vec<usize> = inherit.into_iter().collect();
            BTreeSet::from([pool[rng.gen_range(0..pool.len())]])
        } else {
            kept
        };
    }
    let genes_of = |blocks: &BTreeSet<usize>| -> BTreeSet<usize> {
        (0..spec.n_genes).filter(|&g| blocks.contains(&block_of[g])).collect()
    };
    let planted: Vec<BTreeSet<usize>> = blocks_of_term.iter().map(genes_of).collect();

    // Leaf noise, then re-close upwards (removals at leaves never break
    // closure; additions propagate to every ancestor).
    let mut noisy = planted.clone();
    if spec.noise > 0.0 {
        for &t in &topo {
            if !children[t].is_empty() {
                continue;
            }
            for g in 0..spec.n_genes {
                if rng.gen_bool(spec.noise) && !noisy[t].remove(&g) {
                    noisy[t].insert(g);
                }
            }
        }
        for &t in topo.iter().rev() {
            for &p in &parents[t] {
                let members: Vec<usize> = noisy[t].iter().copied().collect();
                noisy[p].extend(members);
            }
        }
    }

    let mut annotations = Vec::new();
    for g in 0..spec.n_genes {
        for (t, name) in names.iter().enumerate() {
            if noisy[t].contains(&g) {
                annotations.push(AnnotationRecord {
                    gene: genes[g].clone(),
                    term: name.clone(),
                });
            }
        }
    }
    let hierarchy: Vec<HierarchyEdgeRecord> = h_edges
        .iter()
        .map(|(c, p)| HierarchyEdgeRecord {
            child: c.clone(),
            parent: p.clone(),
        })
        .collect();
    let plant = Plant {
        seed: spec.seed,
        block_of: genes
            .iter()
            .zip(&block_of)
            .map(|(g, &b)| (g.clone(), b))
            .collect(),
        term_genes: names
            .iter()
            .zip(&planted)
            .map(|(t, set)| (t.clone(), set.iter().map(|&g| genes[g].clone()).collect()))
            .collect(),
    };
    Ok(SynthData {
        edges,
        annotations,
        hierarchy,
        plant,
    })
}

#[derive(Clone, Debug)]
pub struct SynthPaths {
    pub edges: PathBuf,
    pub annotations: PathBuf,
    pub hierarchy: PathBuf,
    pub plant: PathBuf,
}

/// Write the three ingest-format TSVs plus the plant record. Byte-identical
/// for identical data.
pub fn write_dataset(data: &SynthData, dir: impl AsRef<Path>) -> Result<SynthPaths, SynthError> {
    let dir = dir.as_ref();
    let io_err = |path: &Path, source: std::io::Error| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let paths = SynthPaths {
        edges: dir.join("edges.tsv"),
        annotations: dir.join("annotations.tsv"),
        hierarchy: dir.join("hierarchy.tsv"),
        plant: dir.join("plant.json"),
    };
    std::fs::write(&paths.edges, write_edges(&data.edges)).map_err(|e| io_err(&paths.edges, e))?;
    std::fs::write(&paths.annotations, write_annotations(&data.annotations))
        .map_err(|e| io_err(&paths.annotations, e))?;
    std::fs::write(&paths.hierarchy, write_hierarchy(&data.hierarchy))
        .map_err(|e| io_err(&paths.hierarchy, e))?;
    let plant_json =
        serde_json::to_string_pretty(&data.plant).expect("plant record serializes");
    std::fs::write(&paths.plant, plant_json).map_err(|e| io_err(&paths.plant, e))?;
    Ok(paths)
}

/// Adjusted Rand index between two label vectors (chance-corrected cluster
/// agreement; 1 = identical partitions).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let comb2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.values().map(|&v| comb2(v)).sum();
    let sum_rows: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_cells - expected) / (max_index - expected)
}
