//! Parsing and validation of the three input tables (edges, annotations,
//! hierarchy) and the run configuration.
//!
//! All files are UTF-8 TSV. Lines starting with `#` are comments; blank
//! lines are skipped. Every parse error carries the 1-based line number.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: self-loop on gene '{gene}'")]
    SelfLoop { line: usize, gene: String },
    #[error("line {line}: duplicate edge between '{gene_a}' and '{gene_b}'")]
    DuplicateEdge {
        line: usize,
        gene_a: String,
        gene_b: String,
    },
    #[error("line {line}: weight {weight} is below the co-expression threshold of 1")]
    SubThresholdWeight { line: usize, weight: f64 },
    #[error("line {line}: duplicate pair")]
    DuplicatePair { line: usize },
    #[error("line {line}: hierarchy contains a cycle: {cycle}")]
    CycleDetected { line: usize, cycle: String },
    #[error("line {line}: unknown configuration key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for '{key}': {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        reason: String,
    },
}

/// One undirected co-expression edge. Weights are z-score-like and the
/// loader rejects anything below 1: the threshold is applied upstream, so a
/// smaller value signals a broken preprocessing step, not data to drop.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub gene_a: String,
    pub gene_b: String,
    pub weight: f64,
}

/// One known gene-function association.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub gene: String,
    pub term: String,
}

/// One child -> parent link of the function hierarchy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HierarchyEdgeRecord {
    pub child: String,
    pub parent: String,
}

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Iterate data lines of a TSV body: (1-based line number, line without CR).
fn data_lines(contents: &str) -> impl Iterator<Item = (usize, &str)> {
    contents
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn split_columns(line: usize, text: &str, expected: usize) -> Result<Vec<&str>, IngestError> {
    let fields: Vec<&str> = text.split('\t').collect();
    if fields.len() != expected {
        return Err(IngestError::MalformedLine {
            line,
            reason: format!("expected {expected} tab-separated columns, found {}", fields.len()),
        });
    }
    for field in &fields {
        if field.is_empty() {
            return Err(IngestError::MalformedLine {
                line,
                reason: "empty column".into(),
            });
        }
    }
    Ok(fields)
}

/// Parse an edges.tsv file (gene_a, gene_b, weight).
pub fn parse_edges(path: impl AsRef<Path>) -> Result<Vec<EdgeRecord>, IngestError> {
    let contents = read_to_string(path.as_ref())?;
    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (line, text) in data_lines(&contents) {
        let fields = split_columns(line, text, 3)?;
        let weight: f64 = fields[2].parse().map_err(|_| IngestError::MalformedLine {
            line,
            reason: format!("cannot parse weight '{}'", fields[2]),
        })?;
        if !weight.is_finite() {
            return Err(IngestError::MalformedLine {
                line,
                reason: "weight is not finite".into(),
            });
        }
        if weight < 1.0 {
            return Err(IngestError::SubThresholdWeight { line, weight });
        }
        if fields[0] == fields[1] {
            return Err(IngestError::SelfLoop {
                line,
                gene: fields[0].to_string(),
            });
        }
        let key = if fields[0] < fields[1] {
            (fields[0].to_string(), fields[1].to_string())
        } else {
            (fields[1].to_string(), fields[0].to_string())
        };
        if !seen.insert(key) {
            return Err(IngestError::DuplicateEdge {
                line,
                gene_a: fields[0].to_string(),
                gene_b: fields[1].to_string(),
            });
        }
        records.push(EdgeRecord {
            gene_a: fields[0].to_string(),
            gene_b: fields[1].to_string(),
            weight,
        });
    }
    Ok(records)
}

/// Parse an annotations.tsv file (gene, term).
pub fn parse_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, IngestError> {
    let contents = read_to_string(path.as_ref())?;
    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (line, text) in data_lines(&contents) {
        let fields = split_columns(line, text, 2)?;
        if !seen.insert((fields[0].to_string(), fields[1].to_string())) {
            return Err(IngestError::DuplicatePair { line });
        }
        records.push(AnnotationRecord {
            gene: fields[0].to_string(),
            term: fields[1].to_string(),
        });
    }
    Ok(records)
}

/// Parse a hierarchy.tsv file (child, parent) and verify the edge set is a DAG.
pub fn parse_hierarchy(path: impl AsRef<Path>) -> Result<Vec<HierarchyEdgeRecord>, IngestError> {
    let contents = read_to_string(path.as_ref())?;
    let mut records = Vec::new();
    let mut lines = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (line, text) in data_lines(&contents) {
        let fields = split_columns(line, text, 2)?;
        let pair = (fields[0].to_string(), fields[1].to_string());
        if pair.0 == pair.1 {
            return Err(IngestError::CycleDetected {
                line,
                cycle: format!("{} -> {}", pair.0, pair.1),
            });
        }
        if !seen.insert(pair.clone()) {
            return Err(IngestError::DuplicatePair { line });
        }
        records.push(HierarchyEdgeRecord {
            child: pair.0,
            parent: pair.1,
        });
        lines.push(line);
    }
    if let Some(cycle) = find_cycle(&records) {
        // Report the first file line whose edge participates in the cycle.
        let on_cycle: HashSet<(&str, &str)> = cycle
            .windows(2)
            .map(|w| (w[0].as_str(), w[1].as_str()))
            .collect();
        let line = records
            .iter()
            .zip(&lines)
            .find(|(r, _)| on_cycle.contains(&(r.child.as_str(), r.parent.as_str())))
            .map(|(_, &l)| l)
            .unwrap_or(1);
        let mut text = String::new();
        for (i, term) in cycle.iter().enumerate() {
            if i > 0 {
                text.push_str(" -> ");
            }
            text.push_str(term);
        }
        return Err(IngestError::CycleDetected { line, cycle: text });
    }
    Ok(records)
}

/// Kahn's algorithm over child->parent edges; on failure walks the residual
/// graph to extract one concrete cycle (closed term path).
fn find_cycle(records: &[HierarchyEdgeRecord]) -> Option<Vec<String>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut terms: Vec<&str> = Vec::new();
    for rec in records {
        for name in [rec.child.as_str(), rec.parent.as_str()] {
            if !index.contains_key(name) {
                index.insert(name, terms.len());
                terms.push(name);
            }
        }
    }
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); terms.len()];
    let mut indegree: Vec<usize> = vec![0; terms.len()];
    for rec in records {
        let c = index[rec.child.as_str()];
        let p = index[rec.parent.as_str()];
        out_edges[c].push(p);
        indegree[p] += 1;
    }
    let mut queue: Vec<usize> = (0..terms.len()).filter(|&t| indegree[t] == 0).collect();
    let mut removed = 0;
    while let Some(t) = queue.pop() {
        removed += 1;
        for &p in &out_edges[t] {
            indegree[p] -= 1;
            if indegree[p] == 0 {
                queue.push(p);
            }
        }
    }
    if removed == terms.len() {
        return None;
    }
    // Some node with indegree > 0 is on or leads into a cycle: follow edges
    // inside the residual set until a node repeats.
    let residual: Vec<usize> = (0..terms.len()).filter(|&t| indegree[t] > 0).collect();
    let start = residual[0];
    let mut path = vec![start];
    let mut position: HashMap<usize, usize> = HashMap::from([(start, 0)]);
    let mut current = start;
    loop {
        let next = *out_edges[current]
            .iter()
            .find(|&&p| indegree[p] > 0)
            .expect("residual node must have a residual successor");
        if let Some(&at) = position.get(&next) {
            let mut cycle: Vec<String> = path[at..].iter().map(|&t| terms[t].to_string()).collect();
            cycle.push(terms[next].to_string());
            return Some(cycle);
        }
        position.insert(next, path.len());
        path.push(next);
        current = next;
    }
}

/// Serialize edge records in the same TSV layout `parse_edges` accepts.
pub fn write_edges(records: &[EdgeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        writeln!(out, "{}\t{}\t{}", r.gene_a, r.gene_b, r.weight).unwrap();
    }
    out
}

pub fn write_annotations(records: &[AnnotationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        writeln!(out, "{}\t{}", r.gene, r.term).unwrap();
    }
    out
}

pub fn write_hierarchy(records: &[HierarchyEdgeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        writeln!(out, "{}\t{}", r.child, r.parent).unwrap();
    }
    out
}

/// Run configuration. Defaults mirror the maize case study: K sweeps 10..100
/// in steps of 10, selection cutoff 0.9, functions kept above 200 genes,
/// sub-hierarchies kept at 10+ functions, forests of 200 trees with a
/// minimum split of 5.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub cluster_counts: Vec<usize>,
    pub selection_cutoff: f64,
    pub folds: usize,
    pub min_genes_per_function: usize,
    pub min_functions_per_subhierarchy: usize,
    pub forest_trees: usize,
    pub forest_min_split: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cluster_counts: (1..=10).map(|i| i * 10).collect(),
            selection_cutoff: 0.9,
            folds: 5,
            min_genes_per_function: 200,
            min_functions_per_subhierarchy: 10,
            forest_trees: 200,
            forest_min_split: 5,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Cross-field invariant check for configs constructed in code.
    pub fn validate(&self) -> Result<(), String> {
        if self.cluster_counts.is_empty() {
            return Err("cluster_counts must not be empty".into());
        }
        if self.cluster_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err("cluster_counts must be strictly increasing".into());
        }
        if self.cluster_counts[0] < 2 {
            return Err("every cluster count must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.selection_cutoff) {
            return Err("selection_cutoff must lie in [0, 1]".into());
        }
        if self.folds < 2 {
            return Err("folds must be at least 2".into());
        }
        if self.min_genes_per_function == 0
            || self.min_functions_per_subhierarchy == 0
            || self.forest_trees == 0
        {
            return Err("thresholds and forest_trees must be positive".into());
        }
        if self.forest_min_split < 2 {
            return Err("forest_min_split must be at least 2".into());
        }
        Ok(())
    }

    /// Canonical key=value rendering; also the digest basis for caching.
    pub fn canonical_string(&self) -> String {
        let ks: Vec<String> = self.cluster_counts.iter().map(|k| k.to_string()).collect();
        format!(
            "cluster_counts={}\nselection_cutoff={}\nfolds={}\nmin_genes_per_function={}\n\
             min_functions_per_subhierarchy={}\nforest_trees={}\nforest_min_split={}\nseed={}\n",
            ks.join(","),
            self.selection_cutoff,
            self.folds,
            self.min_genes_per_function,
            self.min_functions_per_subhierarchy,
            self.forest_trees,
            self.forest_min_split,
            self.seed
        )
    }
}

/// Load a key=value config file. Unknown keys are rejected, missing keys
/// take the documented defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, IngestError> {
    let contents = read_to_string(path.as_ref())?;
    parse_config(&contents)
}

pub fn parse_config(contents: &str) -> Result<RunConfig, IngestError> {
    let mut cfg = RunConfig::default();
    let mut assigned: HashSet<String> = HashSet::new();
    for (line, text) in data_lines(contents) {
        let Some((key, value)) = text.split_once('=') else {
            return Err(IngestError::MalformedLine {
                line,
                reason: "expected key=value".into(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let invalid = |reason: &str| IngestError::InvalidValue {
            line,
            key: key.to_string(),
            reason: reason.to_string(),
        };
        if !assigned.insert(key.to_string()) {
            return Err(invalid("key assigned twice"));
        }
        match key {
            "cluster_counts" => {
                let mut ks = Vec::new();
                for part in value.split(',') {
                    let k: usize = part
                        .trim()
                        .parse()
                        .map_err(|_| invalid("expected comma-separated positive integers"))?;
                    ks.push(k);
                }
                if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("cluster counts must be strictly increasing"));
                }
                if ks[0] < 2 {
                    return Err(invalid("every cluster count must be at least 2"));
                }
                cfg.cluster_counts = ks;
            }
            "selection_cutoff" => {
                let c: f64 = value.parse().map_err(|_| invalid("expected a real number"))?;
                if !(0.0..=1.0).contains(&c) {
                    return Err(invalid("must lie in [0, 1]"));
                }
                cfg.selection_cutoff = c;
            }
            "folds" => {
                let v: usize = value.parse().map_err(|_| invalid("expected an integer"))?;
                if v < 2 {
                    return Err(invalid("must be at least 2"));
                }
                cfg.folds = v;
            }
            "min_genes_per_function" => {
                let v: usize = value.parse().map_err(|_| invalid("expected an integer"))?;
                if v == 0 {
                    return Err(invalid("must be positive"));
                }
                cfg.min_genes_per_function = v;
            }
            "min_functions_per_subhierarchy" => {
                let v: usize = value.parse().map_err(|_| invalid("expected an integer"))?;
                if v == 0 {
                    return Err(invalid("must be positive"));
                }
                cfg.min_functions_per_subhierarchy = v;
            }
            "forest_trees" => {
                let v: usize = value.parse().map_err(|_| invalid("expected an integer"))?;
                if v == 0 {
                    return Err(invalid("must be positive"));
                }
                cfg.forest_trees = v;
            }
            "forest_min_split" => {
                let v: usize = value.parse().map_err(|_| invalid("expected an integer"))?;
                if v < 2 {
                    return Err(invalid("must be at least 2"));
                }
                cfg.forest_min_split = v;
            }
            "seed" => {
                cfg.seed = value
                    .parse()
                    .map_err(|_| invalid("expected a 64-bit unsigned integer"))?;
            }
            _ => {
                return Err(IngestError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
    }
    Ok(cfg)
}
