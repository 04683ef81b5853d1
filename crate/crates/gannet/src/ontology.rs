//! The function hierarchy and its annotation map: true-path closure,
//! gene-count filtering, DAG-to-tree conversion, and the split into
//! independent sub-hierarchies.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::ingest::{AnnotationRecord, HierarchyEdgeRecord};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("annotation references unknown term '{term}'")]
    UnknownTerm { term: String },
    #[error("hierarchy edges contain a cycle involving '{term}'")]
    Cycle { term: String },
    #[error("annotations are not true-path closed: gene '{gene}' carries '{term}' but not its ancestor '{ancestor}'")]
    ClosureViolation {
        gene: String,
        term: String,
        ancestor: String,
    },
    #[error("every sub-hierarchy fell below the function threshold")]
    NoSubHierarchies,
    #[error("term '{term}' has an ancestor with no annotated genes")]
    ZeroAncestorGenes { term: String },
    #[error("expected a single-rooted hierarchy, found {n_roots} roots")]
    NotRooted { n_roots: usize },
}

/// Rooted function DAG. Terms are held sorted so term indexes order the
/// same way as identifiers, which makes every tie-break lexicographic.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    terms: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
}

impl Hierarchy {
    pub fn from_records(records: &[HierarchyEdgeRecord]) -> Result<Self, OntologyError> {
        let mut names: Vec<String> = records
            .iter()
            .flat_map(|r| [r.child.clone(), r.parent.clone()])
            .collect();
        names.sort();
        names.dedup();
        let edges: Vec<(String, String)> = records
            .iter()
            .map(|r| (r.child.clone(), r.parent.clone()))
            .collect();
        Hierarchy::new(names, &edges)
    }

    /// Build from an explicit term set plus child->parent pairs. Terms not
    /// named by any edge are allowed (isolated roots).
    pub fn new(mut terms: Vec<String>, edges: &[(String, String)]) -> Result<Self, OntologyError> {
        terms.sort();
        terms.dedup();
        let index: HashMap<&str, usize> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let mut parents = vec![Vec::new(); terms.len()];
        let mut children = vec![Vec::new(); terms.len()];
        for (child, parent) in edges {
            let c = *index.get(child.as_str()).ok_or_else(|| OntologyError::UnknownTerm {
                term: child.clone(),
            })?;
            let p = *index.get(parent.as_str()).ok_or_else(|| OntologyError::UnknownTerm {
                term: parent.clone(),
            })?;
            parents[c].push(p);
            children[p].push(c);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let roots: Vec<usize> = (0..terms.len()).filter(|&t| parents[t].is_empty()).collect();
        let h = Hierarchy {
            terms,
            parents,
            children,
            roots,
        };
        h.check_acyclic()?;
        Ok(h)
    }

    fn check_acyclic(&self) -> Result<(), OntologyError> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: Vec<usize> = self.roots.clone();
        let mut removed = 0;
        while let Some(t) = queue.pop() {
            removed += 1;
            for &c in &self.children[t] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push(c);
                }
            }
        }
        if removed != self.terms.len() {
            let stuck = (0..self.terms.len()).find(|&t| indegree[t] > 0).unwrap();
            return Err(OntologyError::Cycle {
                term: self.terms[stuck].clone(),
            });
        }
        Ok(())
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_ix(&self, name: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(name)).ok()
    }

    pub fn parents_of(&self, term: usize) -> &[usize] {
        &self.parents[term]
    }

    pub fn children_of(&self, term: usize) -> &[usize] {
        &self.children[term]
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Terms in a parents-before-children order.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: Vec<usize> = self.roots.clone();
        queue.sort_unstable();
        let mut order = Vec::with_capacity(self.terms.len());
        // Pop smallest index first so the order is canonical.
        while !queue.is_empty() {
            queue.sort_unstable_by(|a, b| b.cmp(a));
            let t = queue.pop().unwrap();
            order.push(t);
            for &c in &self.children[t] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push(c);
                }
            }
        }
        order
    }

    /// All ancestors of every term (transitive parents), as sorted lists.
    pub fn ancestor_sets(&self) -> Vec<Vec<usize>> {
        let order = self.topological_order();
        let mut sets: Vec<Vec<usize>> = vec![Vec::new(); self.terms.len()];
        for &t in &order {
            let mut acc: Vec<usize> = Vec::new();
            for &p in &self.parents[t] {
                acc.push(p);
                acc.extend_from_slice(&sets[p]);
            }
            acc.sort_unstable();
            acc.dedup();
            sets[t] = acc;
        }
        sets
    }
}

/// Bidirectional gene/term association map. Both directions are kept in
/// sync and the gene and term universes are fixed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationMap {
    genes: Vec<String>,
    terms: Vec<String>,
    by_gene: Vec<Vec<usize>>,
    by_term: Vec<Vec<usize>>,
}

impl AnnotationMap {
    /// Build a raw (not closed) map. The gene universe is either taken from
    /// the pairs themselves or fixed by the caller; in the latter case pairs
    /// whose gene is outside the universe are dropped with a warning.
    pub fn from_pairs(
        pairs: &[AnnotationRecord],
        gene_universe: Option<&[String]>,
        term_universe: &[String],
    ) -> Result<Self, OntologyError> {
        let genes: Vec<String> = match gene_universe {
            Some(u) => {
                let mut g = u.to_vec();
                g.sort();
                g.dedup();
                g
            }
            None => {
                let mut g: Vec<String> = pairs.iter().map(|p| p.gene.clone()).collect();
                g.sort();
                g.dedup();
                g
            }
        };
        let mut terms = term_universe.to_vec();
        terms.sort();
        terms.dedup();
        let gene_ix: HashMap<&str, usize> = genes
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let mut by_gene = vec![Vec::new(); genes.len()];
        let mut dropped = 0usize;
        for pair in pairs {
            let t = terms
                .binary_search_by(|x| x.as_str().cmp(&pair.term))
                .map_err(|_| OntologyError::UnknownTerm {
                    term: pair.term.clone(),
                })?;
            match gene_ix.get(pair.gene.as_str()) {
                Some(&g) => by_gene[g].push(t),
                None => dropped += 1,
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} annotation pairs for genes outside the network");
        }
        for list in &mut by_gene {
            list.sort_unstable();
            list.dedup();
        }
        let by_term = invert(&by_gene, terms.len());
        Ok(AnnotationMap {
            genes,
            terms,
            by_gene,
            by_term,
        })
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn gene_ix(&self, name: &str) -> Option<usize> {
        self.genes.binary_search_by(|g| g.as_str().cmp(name)).ok()
    }

    pub fn term_ix(&self, name: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(name)).ok()
    }

    /// Term indexes annotated to a gene (sorted).
    pub fn terms_of_gene(&self, gene: usize) -> &[usize] {
        &self.by_gene[gene]
    }

    /// Gene indexes annotated with a term (sorted).
    pub fn genes_of_term(&self, term: usize) -> &[usize] {
        &self.by_term[term]
    }

    pub fn has(&self, gene: &str, term: &str) -> bool {
        match (self.gene_ix(gene), self.term_ix(term)) {
            (Some(g), Some(t)) => self.by_gene[g].binary_search(&t).is_ok(),
            _ => false,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.by_gene.iter().map(Vec::len).sum()
    }
}

fn invert(by_gene: &[Vec<usize>], n_terms: usize) -> Vec<Vec<usize>> {
    let mut by_term = vec![Vec::new(); n_terms];
    for (g, terms) in by_gene.iter().enumerate() {
        for &t in terms {
            by_term[t].push(g);
        }
    }
    by_term
}

/// Close a raw annotation map under the true-path rule: every gene annotated
/// with a term is also annotated with all of the term's ancestors.
pub fn true_path_close(raw: &AnnotationMap, h: &Hierarchy) -> Result<AnnotationMap, OntologyError> {
    // The closed map always spans the hierarchy's full term set.
    let remap: Vec<usize> = raw
        .terms
        .iter()
        .map(|t| {
            h.term_ix(t).ok_or_else(|| OntologyError::UnknownTerm {
                term: t.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    let ancestors = h.ancestor_sets();
    let mut by_gene = Vec::with_capacity(raw.genes.len());
    for terms in &raw.by_gene {
        let mut closed: Vec<usize> = Vec::new();
        for &t in terms {
            let ht = remap[t];
            closed.push(ht);
            closed.extend_from_slice(&ancestors[ht]);
        }
        closed.sort_unstable();
        closed.dedup();
        by_gene.push(closed);
    }
    let by_term = invert(&by_gene, h.n_terms());
    Ok(AnnotationMap {
        genes: raw.genes.clone(),
        terms: h.terms().to_vec(),
        by_gene,
        by_term,
    })
}

/// Check that a map is already closed; used by the strict ingestion mode.
pub fn validate_closed(ann: &AnnotationMap, h: &Hierarchy) -> Result<(), OntologyError> {
    let ancestors = h.ancestor_sets();
    for (g, terms) in ann.by_gene.iter().enumerate() {
        for &t in terms {
            let ht = h.term_ix(&ann.terms[t]).ok_or_else(|| OntologyError::UnknownTerm {
                term: ann.terms[t].clone(),
            })?;
            for &a in &ancestors[ht] {
                if ann.term_ix(&h.terms()[a]).map_or(true, |ix| terms.binary_search(&ix).is_err()) {
                    return Err(OntologyError::ClosureViolation {
                        gene: ann.genes[g].clone(),
                        term: ann.terms[t].clone(),
                        ancestor: h.terms()[a].clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Drop every function annotated to `min_genes` genes or fewer, restricting
/// hierarchy edges to the retained terms. Closure is preserved because each
/// ancestor's gene set is a superset of its descendants'.
pub fn filter_functions(
    ann: &AnnotationMap,
    h: &Hierarchy,
    min_genes: usize,
) -> (Hierarchy, AnnotationMap) {
    let retain: Vec<bool> = h
        .terms()
        .iter()
        .map(|t| {
            ann.term_ix(t)
                .map_or(false, |ix| ann.by_term[ix].len() > min_genes)
        })
        .collect();
    let kept_terms: Vec<String> = h
        .terms()
        .iter()
        .zip(&retain)
        .filter(|(_, &r)| r)
        .map(|(t, _)| t.clone())
        .collect();
    let mut edges = Vec::new();
    for t in 0..h.n_terms() {
        if !retain[t] {
            continue;
        }
        for &p in h.parents_of(t) {
            if retain[p] {
                edges.push((h.terms()[t].clone(), h.terms()[p].clone()));
            }
        }
    }
    let filtered_h = Hierarchy::new(kept_terms.clone(), &edges)
        .expect("restriction of a DAG stays acyclic");
    let kept_ix: Vec<usize> = kept_terms
        .iter()
        .map(|t| ann.term_ix(t).expect("retained term exists in map"))
        .collect();
    let old_to_new: HashMap<usize, usize> = kept_ix
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();
    let by_gene: Vec<Vec<usize>> = ann
        .by_gene
        .iter()
        .map(|terms| {
            terms
                .iter()
                .filter_map(|t| old_to_new.get(t).copied())
                .collect()
        })
        .collect();
    let by_term = invert(&by_gene, kept_terms.len());
    (
        filtered_h,
        AnnotationMap {
            genes: ann.genes.clone(),
            terms: kept_terms,
            by_gene,
            by_term,
        },
    )
}

/// One per-root tree extracted from the hierarchy, with its annotated genes.
#[derive(Clone, Debug)]
pub struct SubHierarchy {
    /// Index of the root inside `terms`.
    pub root: usize,
    /// Sorted term identifiers.
    pub terms: Vec<String>,
    /// Tree edge child -> parent; `None` exactly for the root.
    pub parent_of: Vec<Option<usize>>,
    /// Depth per term, root = 0.
    pub level_of: Vec<usize>,
    /// Sorted genes annotated with the root.
    pub gene_set: Vec<String>,
}

impl SubHierarchy {
    pub fn root_name(&self) -> &str {
        &self.terms[self.root]
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn term_ix(&self, name: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(name)).ok()
    }

    pub fn children_of(&self, term: usize) -> Vec<usize> {
        (0..self.terms.len())
            .filter(|&t| self.parent_of[t] == Some(term))
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.level_of.iter().copied().max().unwrap_or(0)
    }

    /// Terms in breadth-first (parents before children) order.
    pub fn tree_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.terms.len()).collect();
        order.sort_by_key(|&t| (self.level_of[t], t));
        order
    }

    /// Term counts per level below the root, formatted like `5/5/2`.
    pub fn functions_per_level(&self) -> String {
        let depth = self.depth();
        if depth == 0 {
            return "-".to_string();
        }
        let mut counts = vec![0usize; depth];
        for &lvl in &self.level_of {
            if lvl > 0 {
                counts[lvl - 1] += 1;
            }
        }
        let mut out = String::new();
        for (i, c) in counts.iter().enumerate() {
            if i > 0 {
                out.push('/');
            }
            write!(out, "{c}").unwrap();
        }
        out
    }
}

/// For every multi-parent term pick the parent maximizing
/// |genes(child)| / |genes(parent)|, ties to the lexicographically smallest
/// parent identifier. Returns the kept parent per term (`None` for roots).
fn best_parents(h: &Hierarchy, ann: &AnnotationMap) -> Result<Vec<Option<usize>>, OntologyError> {
    let counts: Vec<usize> = h
        .terms()
        .iter()
        .map(|t| ann.term_ix(t).map_or(0, |ix| ann.genes_of_term(ix).len()))
        .collect();
    let mut kept = vec![None; h.n_terms()];
    for t in 0..h.n_terms() {
        let parents = h.parents_of(t);
        match parents.len() {
            0 => {}
            1 => kept[t] = Some(parents[0]),
            _ => {
                let child_count = counts[t] as f64;
                let mut best: Option<(usize, f64)> = None;
                // Parents iterate in ascending term index = ascending
                // identifier, so keeping strict improvement realizes the
                // lexicographic tie-break.
                for &p in parents {
                    if counts[p] == 0 {
                        return Err(OntologyError::ZeroAncestorGenes {
                            term: h.terms()[t].clone(),
                        });
                    }
                    let ratio = child_count / counts[p] as f64;
                    if best.map_or(true, |(_, w)| ratio > w) {
                        best = Some((p, ratio));
                    }
                }
                kept[t] = best.map(|(p, _)| p);
            }
        }
    }
    Ok(kept)
}

fn build_subhierarchy(
    h: &Hierarchy,
    ann: &AnnotationMap,
    members: &[usize],
    kept: &[Option<usize>],
    root: usize,
) -> SubHierarchy {
    let terms: Vec<String> = members.iter().map(|&t| h.terms()[t].clone()).collect();
    // `members` is sorted by hierarchy index, which is sorted by name.
    let local: HashMap<usize, usize> = members
        .iter()
        .enumerate()
        .map(|(local, &global)| (global, local))
        .collect();
    let parent_of: Vec<Option<usize>> = members
        .iter()
        .map(|&t| {
            if t == root {
                None
            } else {
                Some(local[&kept[t].expect("non-root member has a kept parent")])
            }
        })
        .collect();
    let mut level_of = vec![usize::MAX; members.len()];
    level_of[local[&root]] = 0;
    // Terms may appear before their parent in sorted order; iterate to a
    // fixed point (tree depth passes at most).
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..members.len() {
            if let Some(p) = parent_of[i] {
                if level_of[p] != usize::MAX && level_of[i] != level_of[p] + 1 {
                    level_of[i] = level_of[p] + 1;
                    changed = true;
                }
            }
        }
    }
    let gene_set: Vec<String> = ann
        .term_ix(&h.terms()[root])
        .map(|ix| {
            ann.genes_of_term(ix)
                .iter()
                .map(|&g| ann.genes()[g].clone())
                .collect()
        })
        .unwrap_or_default();
    SubHierarchy {
        root: local[&root],
        terms,
        parent_of,
        level_of,
        gene_set,
    }
}

/// Convert the whole (filtered) hierarchy into a forest of trees by keeping
/// one parent per term, then return one `SubHierarchy` per root with at
/// least `min_functions` terms, sorted by root identifier.
pub fn split_subhierarchies(
    h: &Hierarchy,
    ann: &AnnotationMap,
    min_functions: usize,
) -> Result<Vec<SubHierarchy>, OntologyError> {
    let kept = best_parents(h, ann)?;
    let mut root_of = vec![usize::MAX; h.n_terms()];
    for t in 0..h.n_terms() {
        let mut cursor = t;
        let mut chain = vec![t];
        while let Some(p) = kept[cursor] {
            if root_of[p] != usize::MAX {
                cursor = root_of[p];
                break;
            }
            chain.push(p);
            cursor = p;
        }
        let root = if kept[cursor].is_none() { cursor } else { root_of[cursor] };
        for link in chain {
            root_of[link] = root;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for t in 0..h.n_terms() {
        groups.entry(root_of[t]).or_default().push(t);
    }
    let subs: Vec<SubHierarchy> = groups
        .into_iter()
        .filter(|(_, members)| members.len() >= min_functions)
        .map(|(root, members)| build_subhierarchy(h, ann, &members, &kept, root))
        .collect();
    if subs.is_empty() {
        return Err(OntologyError::NoSubHierarchies);
    }
    Ok(subs)
}

/// Convert one rooted sub-DAG into a tree with the gene-count ratio rule.
pub fn dag_to_tree(h: &Hierarchy, ann: &AnnotationMap) -> Result<SubHierarchy, OntologyError> {
    if h.roots().len() != 1 {
        return Err(OntologyError::NotRooted {
            n_roots: h.roots().len(),
        });
    }
    let kept = best_parents(h, ann)?;
    let members: Vec<usize> = (0..h.n_terms()).collect();
    Ok(build_subhierarchy(h, ann, &members, &kept, h.roots()[0]))
}

/// Depth of every term of a sub-hierarchy tree, root at 0.
pub fn levels(sh: &SubHierarchy) -> BTreeMap<String, usize> {
    sh.terms
        .iter()
        .zip(&sh.level_of)
        .map(|(t, &l)| (t.clone(), l))
        .collect()
}

/// Render the per-sub-hierarchy summary table (root, function count, gene
/// count, functions per level).
pub fn summary_tsv(subs: &[SubHierarchy]) -> String {
    let mut out = String::from("# root\tn_functions\tn_genes\tfunctions_per_level\n");
    for sh in subs {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            sh.root_name(),
            sh.n_terms(),
            sh.gene_set.len(),
            sh.functions_per_level()
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn pairs(list: &[(&str, &str)]) -> Vec<AnnotationRecord> {
        list.iter()
            .map(|(g, t)| AnnotationRecord {
                gene: g.to_string(),
                term: t.to_string(),
            })
            .collect()
    }

    fn hierarchy(edges: &[(&str, &str)]) -> Hierarchy {
        let recs: Vec<HierarchyEdgeRecord> = edges
            .iter()
            .map(|(c, p)| HierarchyEdgeRecord {
                child: c.to_string(),
                parent: p.to_string(),
            })
            .collect();
        Hierarchy::from_records(&recs).unwrap()
    }

    fn raw(pairs_list: &[(&str, &str)], h: &Hierarchy) -> AnnotationMap {
        AnnotationMap::from_pairs(&pairs(pairs_list), None, h.terms()).unwrap()
    }

    #[test]
    fn closure_walks_chains() {
        let h = hierarchy(&[("c", "b"), ("b", "a")]);
        let ann = true_path_close(&raw(&[("v", "c")], &h), &h).unwrap();
        let g = ann.gene_ix("v").unwrap();
        let names: Vec<&str> = ann.terms_of_gene(g).iter().map(|&t| ann.terms()[t].as_str()).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
    }

    #[test]
    fn closure_at_root_is_identity() {
        let h = hierarchy(&[("b", "a")]);
        let ann = true_path_close(&raw(&[("v", "a")], &h), &h).unwrap();
        let g = ann.gene_ix("v").unwrap();
        assert_eq!(ann.terms_of_gene(g).len(), 1);
    }

    #[test]
    fn closure_covers_diamonds() {
        let h = hierarchy(&[("c", "a"), ("c", "b"), ("a", "r"), ("b", "r")]);
        let ann = true_path_close(&raw(&[("v", "c")], &h), &h).unwrap();
        let g = ann.gene_ix("v").unwrap();
        assert_eq!(ann.terms_of_gene(g).len(), 4);
    }

    #[test]
    fn closure_is_idempotent() {
        let h = hierarchy(&[("c", "b"), ("b", "a"), ("d", "a")]);
        let once = true_path_close(&raw(&[("v", "c"), ("w", "d")], &h), &h).unwrap();
        let twice = true_path_close(&once, &h).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn closed_maps_nest_along_edges() {
        let h = hierarchy(&[("c", "b"), ("b", "a")]);
        let ann = true_path_close(&raw(&[("u", "c"), ("v", "b"), ("w", "a")], &h), &h).unwrap();
        for t in 0..h.n_terms() {
            for &p in h.parents_of(t) {
                let child: HashSet<usize> = ann.genes_of_term(t).iter().copied().collect();
                let parent: HashSet<usize> = ann.genes_of_term(p).iter().copied().collect();
                assert!(child.is_subset(&parent));
            }
        }
        assert!(validate_closed(&ann, &h).is_ok());
    }

    #[test]
    fn unknown_term_is_an_error() {
        let h = hierarchy(&[("b", "a")]);
        let result = AnnotationMap::from_pairs(&pairs(&[("v", "zzz")]), None, h.terms());
        assert!(matches!(result, Err(OntologyError::UnknownTerm { .. })));
    }

    #[test]
    fn filter_is_strict_threshold() {
        let h = hierarchy(&[("b", "a")]);
        // a: 3 genes, b: 2 genes (closed by construction).
        let ann = true_path_close(
            &raw(&[("g1", "b"), ("g2", "b"), ("g3", "a")], &h),
            &h,
        )
        .unwrap();
        let (fh, fann) = filter_functions(&ann, &h, 2);
        assert_eq!(fh.terms(), &["a".to_string()]);
        assert_eq!(fann.terms(), &["a".to_string()]);
        // Exactly-at-threshold terms are dropped: b has 2 genes, min 2.
        let (fh2, _) = filter_functions(&ann, &h, 1);
        assert_eq!(fh2.n_terms(), 2);
    }

    #[test]
    fn filter_above_threshold_is_identity() {
        let h = hierarchy(&[("b", "a")]);
        let ann = true_path_close(&raw(&[("g1", "b"), ("g2", "b")], &h), &h).unwrap();
        let (fh, fann) = filter_functions(&ann, &h, 1);
        assert_eq!(fh.terms(), h.terms());
        assert_eq!(fann, ann);
    }

    #[test]
    fn ratio_rule_keeps_heavier_parent() {
        // c has parents a (20 genes) and b (40 genes), |genes(c)| = 10:
        // ratios 0.5 vs 0.25, keep (c, a).
        let h = hierarchy(&[("a", "r"), ("b", "r"), ("c", "a"), ("c", "b")]);
        let mut list: Vec<(String, String)> = Vec::new();
        for i in 0..10 {
            list.push((format!("g{i:02}"), "c".to_string()));
        }
        for i in 0..20 {
            list.push((format!("g{i:02}"), "a".to_string()));
        }
        for i in 20..50 {
            list.push((format!("h{i:02}"), "b".to_string()));
        }
        for i in 0..10 {
            list.push((format!("g{i:02}"), "b".to_string()));
        }
        let recs: Vec<AnnotationRecord> = list
            .iter()
            .map(|(g, t)| AnnotationRecord {
                gene: g.clone(),
                term: t.clone(),
            })
            .collect();
        let ann =
            true_path_close(&AnnotationMap::from_pairs(&recs, None, h.terms()).unwrap(), &h)
                .unwrap();
        let sh = dag_to_tree(&h, &ann).unwrap();
        let c = sh.term_ix("c").unwrap();
        let a = sh.term_ix("a").unwrap();
        assert_eq!(sh.parent_of[c], Some(a));
    }

    #[test]
    fn ratio_tie_breaks_lexicographically() {
        let h = hierarchy(&[("a", "r"), ("b", "r"), ("c", "a"), ("c", "b")]);
        let mut list: Vec<(&str, &str)> = vec![];
        let genes = ["g0", "g1", "g2", "g3"];
        for g in &genes {
            list.push((g, "a"));
            list.push((g, "b"));
        }
        list.push(("g0", "c"));
        let ann = true_path_close(&raw(&list, &h), &h).unwrap();
        let sh = dag_to_tree(&h, &ann).unwrap();
        let c = sh.term_ix("c").unwrap();
        assert_eq!(sh.parent_of[c], Some(sh.term_ix("a").unwrap()));
    }

    #[test]
    fn tree_input_is_preserved() {
        let h = hierarchy(&[("b", "a"), ("c", "b")]);
        let ann = true_path_close(&raw(&[("g", "c")], &h), &h).unwrap();
        let sh = dag_to_tree(&h, &ann).unwrap();
        assert_eq!(sh.parent_of[sh.term_ix("b").unwrap()], Some(sh.term_ix("a").unwrap()));
        assert_eq!(sh.parent_of[sh.term_ix("c").unwrap()], Some(sh.term_ix("b").unwrap()));
        assert_eq!(sh.level_of[sh.term_ix("c").unwrap()], 2);
    }

    #[test]
    fn levels_on_chain_and_star() {
        let chain = hierarchy(&[("a", "r"), ("b", "a")]);
        let ann = true_path_close(&raw(&[("g", "b")], &chain), &chain).unwrap();
        let sh = dag_to_tree(&chain, &ann).unwrap();
        let map = levels(&sh);
        assert_eq!(map["r"], 0);
        assert_eq!(map["a"], 1);
        assert_eq!(map["b"], 2);

        let star = hierarchy(&[("a", "r"), ("b", "r"), ("c", "r")]);
        let ann = true_path_close(&raw(&[("g", "a"), ("g", "b"), ("g", "c")], &star), &star).unwrap();
        let sh = dag_to_tree(&star, &ann).unwrap();
        for t in ["a", "b", "c"] {
            assert_eq!(levels(&sh)[t], 1);
        }
        assert_eq!(sh.functions_per_level(), "3");
    }

    #[test]
    fn level_census_matches_bfs_oracle() {
        // Chain + star combined under one root.
        let h = hierarchy(&[("a", "r"), ("b", "a"), ("c", "r"), ("d", "r"), ("e", "d")]);
        let every: Vec<(&str, &str)> = ["a", "b", "c", "d", "e", "r"]
            .iter()
            .map(|t| ("g", *t))
            .collect();
        let ann = raw(&every, &h);
        let sh = dag_to_tree(&h, &ann).unwrap();
        // Independent BFS census over the tree edges.
        let mut expected: BTreeMap<usize, usize> = BTreeMap::new();
        for t in 0..sh.n_terms() {
            let mut depth = 0;
            let mut cur = t;
            while let Some(p) = sh.parent_of[cur] {
                depth += 1;
                cur = p;
            }
            *expected.entry(depth).or_default() += 1;
        }
        for (term, lvl) in levels(&sh) {
            let ix = sh.term_ix(&term).unwrap();
            assert_eq!(sh.level_of[ix], lvl);
        }
        let mut census: BTreeMap<usize, usize> = BTreeMap::new();
        for &l in &sh.level_of {
            *census.entry(l).or_default() += 1;
        }
        assert_eq!(census, expected);
    }

    #[test]
    fn zero_gene_parent_is_defensive_error() {
        // A multi-parent term whose parent has no annotated genes can only
        // arise from unclosed input; the ratio rule refuses to divide by it.
        let h = hierarchy(&[("a", "r"), ("b", "r"), ("c", "a"), ("c", "b")]);
        let unclosed = raw(&[("g1", "c"), ("g1", "a"), ("g1", "r")], &h); // b empty
        assert!(matches!(
            dag_to_tree(&h, &unclosed),
            Err(OntologyError::ZeroAncestorGenes { .. })
        ));
    }

    #[test]
    fn split_applies_function_threshold() {
        // Root r1 with 3 descendants, root r2 with 1.
        let h = hierarchy(&[("a", "r1"), ("b", "r1"), ("c", "a"), ("x", "r2")]);
        let all: Vec<(&str, &str)> = [
            ("g1", "c"),
            ("g2", "b"),
            ("g3", "a"),
            ("g4", "x"),
        ]
        .to_vec();
        let ann = true_path_close(&raw(&all, &h), &h).unwrap();
        let subs = split_subhierarchies(&h, &ann, 3).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].root_name(), "r1");
        assert_eq!(subs[0].n_terms(), 4);
        // Exactly at the threshold is retained.
        let subs = split_subhierarchies(&h, &ann, 2).unwrap();
        assert_eq!(subs.len(), 2);
        assert!(matches!(
            split_subhierarchies(&h, &ann, 10),
            Err(OntologyError::NoSubHierarchies)
        ));
    }

    #[test]
    fn summary_has_table_shape() {
        let h = hierarchy(&[("a", "r"), ("b", "r"), ("c", "a")]);
        let ann = true_path_close(
            &raw(&[("g1", "c"), ("g2", "b"), ("g3", "a")], &h),
            &h,
        )
        .unwrap();
        let subs = split_subhierarchies(&h, &ann, 1).unwrap();
        let table = summary_tsv(&subs);
        assert!(table.contains("r\t4\t3\t2/1"));
    }
}
