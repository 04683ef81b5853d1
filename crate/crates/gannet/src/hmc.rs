//! The four hierarchical multi-label strategies (lcn, lcpn, lcl, global):
//! planning the classifier units, per-unit select-then-retrain training with
//! out-of-fold assembly, and the cumulative-probability propagation that
//! enforces the true-path rule on the predictions.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::enrichment::FeatureMatrix;
use crate::explain::{self, ExplainError};
use crate::learn::{self, FoldPlan, ForestParams, LabelMatrix, LearnError};
use crate::ontology::{AnnotationMap, SubHierarchy};
use crate::util::{derive_seed, Matrix};

#[derive(Debug, Error)]
pub enum HmcError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("explain failed: {0}")]
    Explain(ExplainError),
    #[error("feature rows do not match the sub-hierarchy gene set")]
    GeneSetMismatch,
    #[error("fold plan covers {plan} genes but the sub-hierarchy has {genes}")]
    FoldPlanMismatch { plan: usize, genes: usize },
}

/// The four ways of arranging classifiers over a sub-hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyKind {
    Lcn,
    Lcpn,
    Lcl,
    Global,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Lcn,
        StrategyKind::Lcpn,
        StrategyKind::Lcl,
        StrategyKind::Global,
    ];
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StrategyKind::Lcn => "lcn",
            StrategyKind::Lcpn => "lcpn",
            StrategyKind::Lcl => "lcl",
            StrategyKind::Global => "global",
        };
        write!(f, "{name}")
    }
}

impl FromStr for StrategyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lcn" => Ok(StrategyKind::Lcn),
            "lcpn" => Ok(StrategyKind::Lcpn),
            "lcl" => Ok(StrategyKind::Lcl),
            "global" => Ok(StrategyKind::Global),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

/// Which genes a unit trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainRows {
    /// Every gene of the sub-hierarchy.
    All,
    /// Only genes annotated with the given term (the unit's parent node).
    AnnotatedWith(usize),
}

/// One classifier of a strategy: its target terms and training-row policy.
#[derive(Clone, Debug)]
pub struct ClassifierUnit {
    pub id: String,
    pub targets: Vec<usize>,
    pub train_rows: TrainRows,
}

#[derive(Clone, Debug)]
pub struct ClassifierPlan {
    pub strategy: StrategyKind,
    pub units: Vec<ClassifierUnit>,
}

/// Lay out the classifiers a strategy needs for a sub-hierarchy tree:
/// lcn trains one binary unit per non-root term; lcpn one multi-label unit
/// per term with children (targets = the children, trained on genes carrying
/// the parent); lcl one unit per depth; global a single unit over all
/// non-root terms.
pub fn plan(strategy: StrategyKind, sh: &SubHierarchy) -> ClassifierPlan {
    let units = match strategy {
        StrategyKind::Lcn => (0..sh.n_terms())
            .filter(|&t| t != sh.root)
            .map(|t| ClassifierUnit {
                id: format!("lcn:{}", sh.terms[t]),
                targets: vec![t],
                train_rows: TrainRows::All,
            })
            .collect(),
        StrategyKind::Lcpn => (0..sh.n_terms())
            .filter(|&t| !sh.children_of(t).is_empty())
            .map(|t| ClassifierUnit {
                id: format!("lcpn:{}", sh.terms[t]),
                targets: sh.children_of(t),
                train_rows: TrainRows::AnnotatedWith(t),
            })
            .collect(),
        StrategyKind::Lcl => (1..=sh.depth())
            .map(|level| ClassifierUnit {
                id: format!("lcl:level{level}"),
                targets: (0..sh.n_terms()).filter(|&t| sh.level_of[t] == level).collect(),
                train_rows: TrainRows::All,
            })
            .collect(),
        StrategyKind::Global => vec![ClassifierUnit {
            id: "global".to_string(),
            targets: (0..sh.n_terms()).filter(|&t| t != sh.root).collect(),
            train_rows: TrainRows::All,
        }],
    };
    ClassifierPlan { strategy, units }
}

/// Hierarchy-wide association probabilities for one (sub-hierarchy, method).
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionTable {
    pub root: String,
    pub method: String,
    pub genes: Vec<String>,
    pub terms: Vec<String>,
    probs: Matrix,
    pub consistent: bool,
}

impl PredictionTable {
    pub fn new(root: String, method: String, genes: Vec<String>, terms: Vec<String>) -> Self {
        let probs = Matrix::zeros(genes.len(), terms.len());
        PredictionTable {
            root,
            method,
            genes,
            terms,
            probs,
            consistent: false,
        }
    }

    pub fn get(&self, gene: usize, term: usize) -> f64 {
        self.probs.get(gene, term)
    }

    pub fn set(&mut self, gene: usize, term: usize, p: f64) {
        self.probs.set(gene, term, p);
    }

    pub fn term_ix(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == name)
    }

    pub fn gene_ix(&self, name: &str) -> Option<usize> {
        self.genes.binary_search_by(|g| g.as_str().cmp(name)).ok()
    }
}

/// Knobs for one training run.
#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub forest: ForestParams,
    pub selection_cutoff: f64,
    pub seed: u64,
}

/// One row of the selection report: how important each candidate column was
/// to one unit in one fold, and whether it survived the cutoff.
#[derive(Clone, Debug)]
pub struct SelectionRecord {
    pub unit: String,
    pub fold: usize,
    pub column: String,
    pub importance: f64,
    pub selected: bool,
}

struct UnitFoldOutput {
    unit_ix: usize,
    test_rows: Vec<usize>,
    predictions: Matrix,
    records: Vec<SelectionRecord>,
}

fn labels_for(
    ann: &AnnotationMap,
    genes: &[String],
    rows: &[usize],
    sh: &SubHierarchy,
    targets: &[usize],
) -> LabelMatrix {
    let mut labels = LabelMatrix::zeros(rows.len(), targets.len());
    for (i, &r) in rows.iter().enumerate() {
        for (j, &t) in targets.iter().enumerate() {
            if ann.has(&genes[r], &sh.terms[t]) {
                labels.set(i, j, true);
            }
        }
    }
    labels
}

#[allow(clippy::too_many_arguments)]
fn run_unit_fold(
    unit_ix: usize,
    unit: &ClassifierUnit,
    fold: usize,
    sh: &SubHierarchy,
    features: &FeatureMatrix,
    ann: &AnnotationMap,
    folds: &FoldPlan,
    opts: &TrainOptions,
    method: &str,
) -> Result<UnitFoldOutput, HmcError> {
    let test_rows = folds.test_rows(fold);
    let mut train_rows = folds.train_rows(fold);
    if let TrainRows::AnnotatedWith(parent) = unit.train_rows {
        let parent_name = &sh.terms[parent];
        train_rows.retain(|&r| ann.has(&features.genes[r], parent_name));
    }
    // Candidate columns: features of the functions this unit predicts,
    // from both graphs.
    let target_names: std::collections::HashSet<&str> = unit
        .targets
        .iter()
        .map(|&t| sh.terms[t].as_str())
        .collect();
    let candidates: Vec<usize> = (0..features.n_columns())
        .filter(|&c| target_names.contains(features.columns[c].term.as_str()))
        .collect();
    let labels = labels_for(ann, &features.genes, &train_rows, sh, &unit.targets);
    let constant_zero = |records: Vec<SelectionRecord>| UnitFoldOutput {
        unit_ix,
        test_rows: test_rows.clone(),
        predictions: Matrix::zeros(test_rows.len(), unit.targets.len()),
        records,
    };
    if train_rows.is_empty() || labels.total_positives() == 0 {
        log::warn!(
            "{}/{}: no positive training rows in fold {fold}; predicting constant 0",
            sh.root_name(),
            unit.id
        );
        return Ok(constant_zero(Vec::new()));
    }
    if candidates.is_empty() {
        log::warn!(
            "{}/{}: no candidate feature columns; predicting constant 0",
            sh.root_name(),
            unit.id
        );
        return Ok(constant_zero(Vec::new()));
    }
    let train_features = features.values().select_rows(&train_rows).select_columns(&candidates);
    let label_ids: Vec<String> = unit.targets.iter().map(|&t| sh.terms[t].clone()).collect();
    let column_ids: Vec<String> = candidates
        .iter()
        .map(|&c| features.columns[c].to_string())
        .collect();
    let salt = format!("{}/{}/{}/{}", sh.root_name(), method, unit.id, fold);

    // Select-then-retrain: fit on every candidate column, attribute, keep
    // the cutoff prefix, refit on the survivors.
    let full_params = ForestParams {
        seed: derive_seed(opts.seed, &format!("{salt}/full")),
        ..opts.forest
    };
    let full = learn::fit(&train_features, &labels, &label_ids, &column_ids, &full_params)?;
    let attributions = explain::tree_shap(&full, &train_features).map_err(HmcError::Explain)?;
    let importance = explain::mean_abs_importance(&attributions);
    let chosen: Vec<usize> = match explain::select_features(&importance, opts.selection_cutoff) {
        Ok(result) => result.selected_columns,
        Err(ExplainError::AllZeroImportance) => {
            log::warn!(
                "{}/{}: all-zero importances in fold {fold}; keeping every candidate column",
                sh.root_name(),
                unit.id
            );
            (0..candidates.len()).collect()
        }
        Err(other) => return Err(HmcError::Explain(other)),
    };
    let selected_set: std::collections::HashSet<usize> = chosen.iter().copied().collect();
    let records: Vec<SelectionRecord> = {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| {
            importance[b]
                .partial_cmp(&importance[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .map(|c| SelectionRecord {
                unit: unit.id.clone(),
                fold,
                column: column_ids[c].clone(),
                importance: importance[c],
                selected: selected_set.contains(&c),
            })
            .collect()
    };

    let final_params = ForestParams {
        seed: derive_seed(opts.seed, &format!("{salt}/final")),
        ..opts.forest
    };
    let reduced_ids: Vec<String> = chosen.iter().map(|&c| column_ids[c].clone()).collect();
    let reduced_train = train_features.select_columns(&chosen);
    let reduced = learn::fit(&reduced_train, &labels, &label_ids, &reduced_ids, &final_params)?;
    let global_cols: Vec<usize> = chosen.iter().map(|&c| candidates[c]).collect();
    let test_features = features.values().select_rows(&test_rows).select_columns(&global_cols);
    let predictions = learn::predict_proba(&reduced, &test_features)?;
    Ok(UnitFoldOutput {
        unit_ix,
        test_rows,
        predictions,
        records,
    })
}

/// Train every unit of the plan across every fold and assemble the
/// out-of-fold predictions: each gene is scored by models that never saw it.
/// The root column is pinned to 1 (membership is certain by construction).
pub fn train_strategy(
    plan: &ClassifierPlan,
    sh: &SubHierarchy,
    features: &FeatureMatrix,
    ann: &AnnotationMap,
    folds: &FoldPlan,
    opts: &TrainOptions,
) -> Result<(PredictionTable, Vec<SelectionRecord>), HmcError> {
    if features.genes != sh.gene_set {
        return Err(HmcError::GeneSetMismatch);
    }
    if folds.fold_of.len() != sh.gene_set.len() {
        return Err(HmcError::FoldPlanMismatch {
            plan: folds.fold_of.len(),
            genes: sh.gene_set.len(),
        });
    }
    let method = plan.strategy.to_string();
    let tasks: Vec<(usize, usize)> = (0..plan.units.len())
        .flat_map(|u| (0..folds.n_folds).map(move |f| (u, f)))
        .collect();
    let outputs: Vec<UnitFoldOutput> = tasks
        .par_iter()
        .map(|&(u, f)| {
            run_unit_fold(u, &plan.units[u], f, sh, features, ann, folds, opts, &method)
        })
        .collect::<Result<_, _>>()?;

    let mut table = PredictionTable::new(
        sh.root_name().to_string(),
        method,
        sh.gene_set.clone(),
        sh.terms.clone(),
    );
    let mut records = Vec::new();
    for output in outputs {
        let unit = &plan.units[output.unit_ix];
        for (i, &gene) in output.test_rows.iter().enumerate() {
            for (j, &term) in unit.targets.iter().enumerate() {
                table.set(gene, term, output.predictions.get(i, j));
            }
        }
        records.extend(output.records);
    }
    for gene in 0..table.genes.len() {
        table.set(gene, sh.root, 1.0);
    }
    Ok((table, records))
}

/// Serialize tables in the predictions.tsv layout: sub_hierarchy_root,
/// method, gene, term, probability. Probabilities print in shortest exact
/// form, so re-parsing reproduces every bit.
pub fn predictions_tsv(tables: &[PredictionTable]) -> String {
    let mut out = String::from("# sub_hierarchy_root\tmethod\tgene\tterm\tprobability\n");
    for table in tables {
        for (g, gene) in table.genes.iter().enumerate() {
            for (t, term) in table.terms.iter().enumerate() {
                use fmt::Write as _;
                writeln!(
                    out,
                    "{}\t{}\t{gene}\t{term}\t{}",
                    table.root,
                    table.method,
                    table.get(g, t)
                )
                .unwrap();
            }
        }
    }
    out
}

/// Parse a predictions.tsv body back into per-(root, method) tables.
pub fn parse_predictions_tsv(text: &str) -> Result<Vec<PredictionTable>, String> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(String, String), BTreeMap<(String, String), f64>> = BTreeMap::new();
    for (ix, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(format!("line {}: expected 5 columns", ix + 1));
        }
        let prob: f64 = fields[4]
            .parse()
            .map_err(|_| format!("line {}: bad probability '{}'", ix + 1, fields[4]))?;
        cells
            .entry((fields[0].to_string(), fields[1].to_string()))
            .or_default()
            .insert((fields[2].to_string(), fields[3].to_string()), prob);
    }
    let mut tables = Vec::new();
    for ((root, method), entries) in cells {
        let mut genes: Vec<String> = entries.keys().map(|(g, _)| g.clone()).collect();
        genes.sort();
        genes.dedup();
        let mut terms: Vec<String> = entries.keys().map(|(_, t)| t.clone()).collect();
        terms.sort();
        terms.dedup();
        let mut table = PredictionTable::new(root, method, genes, terms);
        for ((gene, term), prob) in entries {
            let g = table.gene_ix(&gene).expect("gene collected above");
            let t = table.term_ix(&term).expect("term collected above");
            table.set(g, t, prob);
        }
        tables.push(table);
    }
    Ok(tables)
}

/// Multiply each term's probability by its (already final) parent's,
/// walking the tree from the root towards the leaves. Afterwards no child
/// outranks its parent and the root stays at 1.
pub fn propagate(mut table: PredictionTable, sh: &SubHierarchy) -> PredictionTable {
    for &term in sh.tree_order().iter() {
        if let Some(parent) = sh.parent_of[term] {
            for gene in 0..table.genes.len() {
                let combined = table.get(gene, term) * table.get(gene, parent);
                table.set(gene, term, combined);
            }
        }
    }
    table.consistent = true;
    table
}
