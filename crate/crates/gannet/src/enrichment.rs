//! Over-representation features: for every (gene, function, cluster count)
//! the one-sided hypergeometric tail probability that the gene's cluster
//! contains at least the observed number of genes carrying the function.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::ontology::AnnotationMap;
use crate::spectral::{ClusterMatrix, GraphTag};
use crate::util::{fmt_sig17, Matrix};

#[derive(Debug, Error)]
pub enum EnrichError {
    #[error("invalid hypergeometric counts: x={x}, population={population}, annotated={annotated}, cluster={cluster}")]
    InvalidCounts {
        x: usize,
        population: usize,
        annotated: usize,
        cluster: usize,
    },
    #[error("annotation gene set does not match the clustered gene set")]
    GeneSetMismatch,
    #[error("feature matrices have different gene orders")]
    GeneOrderMismatch,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    MalformedFeatureFile {
        path: String,
        line: usize,
        reason: String,
    },
}

/// Identity of one feature column: which graph, which function, which k.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureDescriptor {
    pub tag: GraphTag,
    pub term: String,
    pub cluster_count: usize,
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}", self.tag, self.term, self.cluster_count)
    }
}

impl std::str::FromStr for FeatureDescriptor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 3 {
            return Err(format!("expected TAG|term|k, got '{s}'"));
        }
        Ok(FeatureDescriptor {
            tag: parts[0].parse()?,
            term: parts[1].to_string(),
            cluster_count: parts[2]
                .parse()
                .map_err(|_| format!("bad cluster count in '{s}'"))?,
        })
    }
}

/// Genes x (function . k) matrix of enrichment p-values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub genes: Vec<String>,
    pub columns: Vec<FeatureDescriptor>,
    values: Matrix,
}

impl FeatureMatrix {
    pub fn new(genes: Vec<String>, columns: Vec<FeatureDescriptor>, values: Matrix) -> Self {
        assert_eq!(values.n_rows(), genes.len());
        assert_eq!(values.n_cols(), columns.len());
        FeatureMatrix {
            genes,
            columns,
            values,
        }
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, gene: usize, column: usize) -> f64 {
        self.values.get(gene, column)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn gene_ix(&self, name: &str) -> Option<usize> {
        self.genes.binary_search_by(|g| g.as_str().cmp(name)).ok()
    }

    /// Row/column slice: the named genes (rows) and the columns whose
    /// descriptor function is in `terms`. Exact value copies.
    pub fn slice(&self, genes: &[String], terms: &[String]) -> Result<FeatureMatrix, EnrichError> {
        let term_set: std::collections::HashSet<&str> =
            terms.iter().map(String::as_str).collect();
        let mut rows = Vec::with_capacity(genes.len());
        for g in genes {
            rows.push(self.gene_ix(g).ok_or(EnrichError::GeneSetMismatch)?);
        }
        let cols: Vec<usize> = (0..self.columns.len())
            .filter(|&c| term_set.contains(self.columns[c].term.as_str()))
            .collect();
        let values = self.values.select_rows(&rows).select_columns(&cols);
        Ok(FeatureMatrix {
            genes: genes.to_vec(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            values,
        })
    }

    /// TSV persistence: header `gene` then one `TAG|term|k` column id per
    /// feature; values carry 17 significant digits and round-trip exactly.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene");
        for c in &self.columns {
            out.push('\t');
            write!(out, "{c}").unwrap();
        }
        out.push('\n');
        for (g, gene) in self.genes.iter().enumerate() {
            out.push_str(gene);
            for c in 0..self.columns.len() {
                out.push('\t');
                out.push_str(&fmt_sig17(self.values.get(g, c)));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<(), EnrichError> {
        std::fs::write(path.as_ref(), self.to_tsv()).map_err(|source| EnrichError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<FeatureMatrix, EnrichError> {
        let path_str = path.as_ref().display().to_string();
        let contents = std::fs::read_to_string(path.as_ref()).map_err(|source| EnrichError::Io {
            path: path_str.clone(),
            source,
        })?;
        let malformed = |line: usize, reason: String| EnrichError::MalformedFeatureFile {
            path: path_str.clone(),
            line,
            reason,
        };
        let mut lines = contents.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| malformed(1, "empty file".into()))?;
        let mut fields = header.split('\t');
        if fields.next() != Some("gene") {
            return Err(malformed(1, "header must start with 'gene'".into()));
        }
        let columns: Vec<FeatureDescriptor> = fields
            .map(|f| f.parse().map_err(|e| malformed(1, e)))
            .collect::<Result<_, _>>()?;
        let mut genes = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ix, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let gene = fields
                .next()
                .ok_or_else(|| malformed(ix + 1, "missing gene".into()))?;
            let mut row = Vec::with_capacity(columns.len());
            for f in fields {
                row.push(
                    f.parse::<f64>()
                        .map_err(|_| malformed(ix + 1, format!("bad value '{f}'")))?,
                );
            }
            if row.len() != columns.len() {
                return Err(malformed(
                    ix + 1,
                    format!("expected {} values, found {}", columns.len(), row.len()),
                ));
            }
            genes.push(gene.to_string());
            rows.push(row);
        }
        Ok(FeatureMatrix {
            genes,
            columns,
            values: Matrix::from_rows(rows),
        })
    }
}

/// Natural-log factorial table; ln C(n, k) comes out of three lookups.
pub struct LogFactTable {
    table: Vec<f64>,
}

impl LogFactTable {
    pub fn up_to(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for i in 1..=n {
            acc += (i as f64).ln();
            table.push(acc);
        }
        LogFactTable { table }
    }

    fn ln_choose(&self, n: usize, k: usize) -> f64 {
        debug_assert!(k <= n);
        self.table[n] - self.table[k] - self.table[n - k]
    }
}

/// Upper tail P[X >= x] for X ~ hypergeometric(population, annotated,
/// cluster), computed in log space.
pub fn hypergeom_tail(
    x: usize,
    population: usize,
    annotated: usize,
    cluster: usize,
) -> Result<f64, EnrichError> {
    let table = LogFactTable::up_to(population);
    hypergeom_tail_with(x, population, annotated, cluster, &table)
}

pub fn hypergeom_tail_with(
    x: usize,
    population: usize,
    annotated: usize,
    cluster: usize,
    table: &LogFactTable,
) -> Result<f64, EnrichError> {
    let hi = annotated.min(cluster);
    if annotated > population || cluster > population || x > hi {
        return Err(EnrichError::InvalidCounts {
            x,
            population,
            annotated,
            cluster,
        });
    }
    // Support starts at max(0, annotated + cluster - population); at or
    // below it the tail is certain.
    let lo = (annotated + cluster).saturating_sub(population);
    if x <= lo {
        return Ok(1.0);
    }
    let denom = table.ln_choose(population, cluster);
    let mut tail = 0.0;
    for i in x..=hi {
        let ln_p = table.ln_choose(annotated, i) + table.ln_choose(population - annotated, cluster - i)
            - denom;
        tail += ln_p.exp();
    }
    Ok(tail.clamp(0.0, 1.0))
}

/// Build the feature matrix for one clustered graph: one column per
/// (function, k), every gene in a cluster sharing the cluster's p-value.
pub fn enrich(
    clusters: &ClusterMatrix,
    ann: &AnnotationMap,
    terms: &[String],
    tag: GraphTag,
) -> Result<FeatureMatrix, EnrichError> {
    if clusters.genes != ann.genes() {
        return Err(EnrichError::GeneSetMismatch);
    }
    let population = clusters.genes.len();
    let table = LogFactTable::up_to(population);
    let term_ixs: Vec<usize> = terms
        .iter()
        .map(|t| ann.term_ix(t).ok_or(EnrichError::GeneSetMismatch))
        .collect::<Result<_, _>>()?;
    // Cluster sizes per sweep column.
    let sizes: Vec<HashMap<usize, usize>> = clusters
        .labels
        .iter()
        .map(|labels| {
            let mut m = HashMap::new();
            for &l in labels {
                *m.entry(l).or_insert(0) += 1;
            }
            m
        })
        .collect();
    // Columns ordered by (function, k); each is independent.
    let mut columns = Vec::with_capacity(terms.len() * clusters.cluster_counts.len());
    for term in terms {
        for &k in &clusters.cluster_counts {
            columns.push(FeatureDescriptor {
                tag,
                term: term.clone(),
                cluster_count: k,
            });
        }
    }
    let per_column: Vec<Vec<f64>> = (0..columns.len())
        .into_par_iter()
        .map(|col| {
            let term_pos = col / clusters.cluster_counts.len();
            let sweep_col = col % clusters.cluster_counts.len();
            let labels = &clusters.labels[sweep_col];
            let annotated_genes = ann.genes_of_term(term_ixs[term_pos]);
            let annotated = annotated_genes.len();
            let mut overlap: HashMap<usize, usize> = HashMap::new();
            for &g in annotated_genes {
                *overlap.entry(labels[g]).or_insert(0) += 1;
            }
            let mut per_cluster: HashMap<usize, f64> = HashMap::new();
            for (&cluster_id, &size) in &sizes[sweep_col] {
                let x = overlap.get(&cluster_id).copied().unwrap_or(0);
                let p = hypergeom_tail_with(x, population, annotated, size, &table)
                    .expect("counts derived from a partition are consistent");
                per_cluster.insert(cluster_id, p);
            }
            labels.iter().map(|l| per_cluster[l]).collect()
        })
        .collect();
    let mut values = Matrix::zeros(population, columns.len());
    for (c, column) in per_column.iter().enumerate() {
        for (g, &v) in column.iter().enumerate() {
            values.set(g, c, v);
        }
    }
    Ok(FeatureMatrix {
        genes: clusters.genes.clone(),
        columns,
        values,
    })
}

/// Append the columns of `jf` after the columns of `jg`.
pub fn concat_features(
    jg: &FeatureMatrix,
    jf: &FeatureMatrix,
) -> Result<FeatureMatrix, EnrichError> {
    if jg.genes != jf.genes {
        return Err(EnrichError::GeneOrderMismatch);
    }
    let mut columns = jg.columns.clone();
    columns.extend(jf.columns.iter().cloned());
    let mut values = Matrix::zeros(jg.n_genes(), columns.len());
    for g in 0..jg.n_genes() {
        for c in 0..jg.n_columns() {
            values.set(g, c, jg.get(g, c));
        }
        for c in 0..jf.n_columns() {
            values.set(g, jg.n_columns() + c, jf.get(g, c));
        }
    }
    Ok(FeatureMatrix {
        genes: jg.genes.clone(),
        columns,
        values,
    })
}
