//! Precision-recall evaluation: the pooled (micro) curve over all
//! gene-function pairs, per-function curves, and their uniform and
//! frequency-weighted aggregates. Root terms never enter the scoring; their
//! probability is 1 by construction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::hmc::PredictionTable;
use crate::ontology::AnnotationMap;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no positive gene-function pairs; the metric is undefined")]
    NoPositives,
    #[error("term '{term}' has no positive genes; its PR area is undefined")]
    NoPositivesForTerm { term: String },
    #[error("curve is empty")]
    EmptyCurve,
}

/// A precision-recall curve, points ordered by descending threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct PRCurve {
    /// Distinct predicted probabilities, descending.
    pub thresholds: Vec<f64>,
    /// (recall, precision) at each threshold.
    pub points: Vec<(f64, f64)>,
}

/// Step-wise curve from (score, is_positive) pairs: thresholds are the
/// distinct scores, a pair counts as predicted-positive at threshold t when
/// its score is >= t.
fn curve_from_pairs(mut pairs: Vec<(f64, bool)>) -> Result<PRCurve, EvalError> {
    let total_positives = pairs.iter().filter(|&&(_, p)| p).count();
    if total_positives == 0 {
        return Err(EvalError::NoPositives);
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut thresholds = Vec::new();
    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < pairs.len() {
        let threshold = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / total_positives as f64;
        thresholds.push(threshold);
        points.push((recall, precision));
    }
    Ok(PRCurve { thresholds, points })
}

/// Pooled curve over every (gene, non-root term) pair of the table.
pub fn micro_curve(pred: &PredictionTable, truth: &AnnotationMap) -> Result<PRCurve, EvalError> {
    let mut pairs = Vec::new();
    for (g, gene) in pred.genes.iter().enumerate() {
        for (t, term) in pred.terms.iter().enumerate() {
            if term == &pred.root {
                continue;
            }
            pairs.push((pred.get(g, t), truth.has(gene, term)));
        }
    }
    curve_from_pairs(pairs)
}

/// Step-wise area: sum of (R_i - R_{i-1}) * P_i with R_0 = 0.
pub fn auc(curve: &PRCurve) -> f64 {
    let mut area = 0.0;
    let mut last_recall = 0.0;
    for &(recall, precision) in &curve.points {
        area += (recall - last_recall) * precision;
        last_recall = recall;
    }
    area
}

/// Binary PR curve over genes for one term.
pub fn term_curve(
    pred: &PredictionTable,
    truth: &AnnotationMap,
    term: &str,
) -> Result<PRCurve, EvalError> {
    let t = pred
        .term_ix(term)
        .ok_or_else(|| EvalError::NoPositivesForTerm { term: term.into() })?;
    let pairs: Vec<(f64, bool)> = pred
        .genes
        .iter()
        .enumerate()
        .map(|(g, gene)| (pred.get(g, t), truth.has(gene, term)))
        .collect();
    curve_from_pairs(pairs).map_err(|_| EvalError::NoPositivesForTerm { term: term.into() })
}

/// Area under one term's PR curve.
pub fn per_function_auprc(
    pred: &PredictionTable,
    truth: &AnnotationMap,
    term: &str,
) -> Result<f64, EvalError> {
    Ok(auc(&term_curve(pred, truth, term)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    Uniform,
    Frequency,
}

/// Aggregate per-function areas: a plain mean, or weighted by each
/// function's positive-gene count.
pub fn aggregate(
    per_function: &BTreeMap<String, f64>,
    counts: &BTreeMap<String, usize>,
    mode: WeightMode,
) -> f64 {
    assert!(!per_function.is_empty(), "aggregate of zero functions");
    match mode {
        WeightMode::Uniform => {
            per_function.values().sum::<f64>() / per_function.len() as f64
        }
        WeightMode::Frequency => {
            let total: usize = per_function.keys().map(|t| counts[t]).sum();
            per_function
                .iter()
                .map(|(t, &v)| counts[t] as f64 / total as f64 * v)
                .sum()
        }
    }
}

/// All three scores for one (sub-hierarchy, method) table.
#[derive(Clone, Debug)]
pub struct MetricReport {
    pub micro_auprc: f64,
    pub macro_auprc: f64,
    pub weighted_macro_auprc: f64,
    pub per_function: BTreeMap<String, f64>,
    pub weights: BTreeMap<String, f64>,
    /// Terms with no positive genes, excluded from the macro aggregates.
    pub skipped_terms: Vec<String>,
}

pub fn evaluate_table(
    pred: &PredictionTable,
    truth: &AnnotationMap,
) -> Result<MetricReport, EvalError> {
    let micro_auprc = auc(&micro_curve(pred, truth)?);
    let mut per_function = BTreeMap::new();
    let mut counts = BTreeMap::new();
    let mut skipped = Vec::new();
    for term in &pred.terms {
        if term == &pred.root {
            continue;
        }
        let positives = pred
            .genes
            .iter()
            .filter(|gene| truth.has(gene, term))
            .count();
        if positives == 0 {
            log::warn!(
                "{}: term '{term}' has no positive genes; excluded from macro averages",
                pred.root
            );
            skipped.push(term.clone());
            continue;
        }
        per_function.insert(term.clone(), per_function_auprc(pred, truth, term)?);
        counts.insert(term.clone(), positives);
    }
    if per_function.is_empty() {
        return Err(EvalError::NoPositives);
    }
    let total: usize = counts.values().sum();
    let weights: BTreeMap<String, f64> = counts
        .iter()
        .map(|(t, &c)| (t.clone(), c as f64 / total as f64))
        .collect();
    Ok(MetricReport {
        micro_auprc,
        macro_auprc: aggregate(&per_function, &counts, WeightMode::Uniform),
        weighted_macro_auprc: aggregate(&per_function, &counts, WeightMode::Frequency),
        per_function,
        weights,
        skipped_terms: skipped,
    })
}

/// metrics.tsv rows for one evaluated table.
pub fn metrics_rows(root: &str, method: &str, report: &MetricReport) -> String {
    let mut out = String::new();
    writeln!(out, "{root}\t{method}\tmicro\t{}", report.micro_auprc).unwrap();
    writeln!(out, "{root}\t{method}\tmacro\t{}", report.macro_auprc).unwrap();
    writeln!(
        out,
        "{root}\t{method}\tmacro_weighted\t{}",
        report.weighted_macro_auprc
    )
    .unwrap();
    out
}

/// curves.tsv rows: the pooled curve under term "ALL" plus per-term curves.
pub fn curves_rows(
    root: &str,
    method: &str,
    pred: &PredictionTable,
    truth: &AnnotationMap,
) -> Result<String, EvalError> {
    let mut out = String::new();
    let pooled = micro_curve(pred, truth)?;
    for (threshold, (recall, precision)) in pooled.thresholds.iter().zip(&pooled.points) {
        writeln!(out, "{root}\t{method}\tALL\t{threshold}\t{precision}\t{recall}").unwrap();
    }
    for term in &pred.terms {
        if term == &pred.root {
            continue;
        }
        if let Ok(curve) = term_curve(pred, truth, term) {
            for (threshold, (recall, precision)) in curve.thresholds.iter().zip(&curve.points) {
                writeln!(out, "{root}\t{method}\t{term}\t{threshold}\t{precision}\t{recall}")
                    .unwrap();
            }
        }
    }
    Ok(out)
}
