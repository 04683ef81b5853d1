//! End-to-end orchestration with digest-based caching: feature extraction,
//! prediction, evaluation, the feature-source ablation, and the combined
//! run-all flow. Every stage writes through temporary files and registers
//! its outputs in the run manifest only after the whole stage succeeded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enrichment::{concat_features, enrich, EnrichError, FeatureMatrix};
use crate::eval::{self, EvalError};
use crate::graph::{build_affinity, GraphError, Network};
use crate::hmc::{
    self, parse_predictions_tsv, predictions_tsv, HmcError, PredictionTable, SelectionRecord,
    StrategyKind, TrainOptions,
};
use crate::ingest::{
    self, IngestError, RunConfig,
};
use crate::learn::{stratified_kfold, ForestParams, LabelMatrix, LearnError, MaxFeatures};
use crate::ontology::{
    filter_functions, split_subhierarchies, summary_tsv, true_path_close, validate_closed,
    AnnotationMap, Hierarchy, OntologyError, SubHierarchy,
};
use crate::spectral::{cluster_sweep, clusters_tsv, EigenOptions, GraphTag, SpectralError};
use crate::synth::{self, SynthError, SynthPaths, SynthSpec};
use crate::util::{derive_seed, sha256_hex};

/// Environment variable overriding where the cache manifest lives.
pub const CACHE_DIR_ENV: &str = "GANNET_CACHE_DIR";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Enrich(#[from] EnrichError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Hmc(#[from] HmcError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Exit code classification: 1 for validation/config problems, 2 for
    /// runtime or numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Ingest(_)
            | PipelineError::Ontology(_)
            | PipelineError::Synth(_)
            | PipelineError::Config(_)
            | PipelineError::BadInput(_)
            | PipelineError::Graph(GraphError::DegenerateWeights)
            | PipelineError::Graph(GraphError::UnknownGene { .. }) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Debug)]
pub struct InputPaths {
    pub edges: PathBuf,
    pub annotations: PathBuf,
    pub hierarchy: PathBuf,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    /// Recompute even when the cache digests match.
    pub force: bool,
    /// Treat non-closed input annotations as an error instead of closing
    /// them silently.
    pub strict: bool,
    /// Also write the affinity edge list and cluster assignments.
    pub export_intermediates: bool,
}

/// Inputs parsed, validated and canonicalized: the network over sorted
/// genes, and the closed annotation map over exactly the network's genes.
pub struct Dataset {
    pub network: Network,
    pub hierarchy: Hierarchy,
    pub annotations: AnnotationMap,
}

pub fn load_dataset(paths: &InputPaths, strict: bool) -> Result<Dataset, PipelineError> {
    let edges = ingest::parse_edges(&paths.edges)?;
    if edges.is_empty() {
        return Err(PipelineError::BadInput("edge list is empty".into()));
    }
    let network = Network::from_edge_records(&edges)?;
    let hierarchy = Hierarchy::from_records(&ingest::parse_hierarchy(&paths.hierarchy)?)?;
    let raw = AnnotationMap::from_pairs(
        &ingest::parse_annotations(&paths.annotations)?,
        Some(network.genes()),
        hierarchy.terms(),
    )?;
    if strict {
        validate_closed(&raw, &hierarchy)?;
    }
    let annotations = true_path_close(&raw, &hierarchy)?;
    Ok(Dataset {
        network,
        hierarchy,
        annotations,
    })
}

// ---------------------------------------------------------------------------
// Run manifest and staged writes

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub seed: u64,
    pub config_digest: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn cache_dir_for(out_dir: &Path) -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| out_dir.to_path_buf())
}

pub fn load_manifest(cache_dir: &Path) -> Result<RunManifest, PipelineError> {
    let path = cache_dir.join("manifest.json");
    if !path.exists() {
        return Ok(RunManifest {
            version: 1,
            ..RunManifest::default()
        });
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::BadInput(format!("corrupt manifest {}: {e}", path.display())))
}

fn save_manifest(cache_dir: &Path, manifest: &RunManifest) -> Result<(), PipelineError> {
    fs::create_dir_all(cache_dir).map_err(io_err(cache_dir))?;
    let path = cache_dir.join("manifest.json");
    let tmp = cache_dir.join("manifest.json.tmp");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(())
}

fn digest_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}

fn stage_is_cached(
    manifest: &RunManifest,
    name: &str,
    inputs: &BTreeMap<String, String>,
    out_dir: &Path,
) -> bool {
    match manifest.stages.get(name) {
        Some(record) if &record.inputs == inputs => record.outputs.iter().all(|(rel, digest)| {
            fs::read(out_dir.join(rel))
                .map(|bytes| sha256_hex(&bytes) == *digest)
                .unwrap_or(false)
        }),
        _ => false,
    }
}

/// Collects a stage's outputs as temporary files and renames them into
/// place only on commit; dropped uncommitted, the temporaries are removed.
struct StageWriter {
    out_dir: PathBuf,
    pending: Vec<(PathBuf, PathBuf, String, String)>,
    committed: bool,
}

impl StageWriter {
    fn new(out_dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        Ok(StageWriter {
            out_dir: out_dir.to_path_buf(),
            pending: Vec::new(),
            committed: false,
        })
    }

    fn add(&mut self, rel: &str, contents: &str) -> Result<(), PipelineError> {
        let final_path = self.out_dir.join(rel);
        let tmp_path = self.out_dir.join(format!("{rel}.tmp"));
        fs::write(&tmp_path, contents).map_err(io_err(&tmp_path))?;
        self.pending.push((
            tmp_path,
            final_path,
            rel.to_string(),
            sha256_hex(contents.as_bytes()),
        ));
        Ok(())
    }

    fn commit(mut self) -> Result<BTreeMap<String, String>, PipelineError> {
        let mut outputs = BTreeMap::new();
        for (tmp, final_path, rel, digest) in self.pending.drain(..) {
            fs::rename(&tmp, &final_path).map_err(io_err(&final_path))?;
            outputs.insert(rel, digest);
        }
        self.committed = true;
        Ok(outputs)
    }
}

impl Drop for StageWriter {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, _, _, _) in &self.pending {
                let _ = fs::remove_file(tmp);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// validate

#[derive(Clone, Debug)]
pub struct ValidationSummary {
    pub n_genes: usize,
    pub n_edges: usize,
    pub n_terms: usize,
    pub n_annotation_pairs_closed: usize,
    pub n_roots: usize,
    pub n_subhierarchies: usize,
    /// The sub-hierarchy report table (root, functions, genes, per level).
    pub subhierarchy_table: String,
}

pub fn cmd_validate(
    cfg: &RunConfig,
    inputs: &InputPaths,
    strict: bool,
) -> Result<ValidationSummary, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let dataset = load_dataset(inputs, strict)?;
    let (filtered_h, filtered_ann) = filter_functions(
        &dataset.annotations,
        &dataset.hierarchy,
        cfg.min_genes_per_function,
    );
    let subs = match split_subhierarchies(
        &filtered_h,
        &filtered_ann,
        cfg.min_functions_per_subhierarchy,
    ) {
        Ok(subs) => subs,
        Err(OntologyError::NoSubHierarchies) => Vec::new(),
        Err(other) => return Err(other.into()),
    };
    Ok(ValidationSummary {
        n_genes: dataset.network.n_nodes(),
        n_edges: dataset.network.n_edges(),
        n_terms: dataset.hierarchy.n_terms(),
        n_annotation_pairs_closed: dataset.annotations.n_pairs(),
        n_roots: dataset.hierarchy.roots().len(),
        n_subhierarchies: subs.len(),
        subhierarchy_table: summary_tsv(&subs),
    })
}

// ---------------------------------------------------------------------------
// synth

pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<SynthPaths, PipelineError> {
    let data = synth::generate(spec)?;
    Ok(synth::write_dataset(&data, out_dir)?)
}

// ---------------------------------------------------------------------------
// features

#[derive(Clone, Debug)]
pub struct FeatureOutputs {
    pub features_g: PathBuf,
    pub features_f: PathBuf,
    pub cached: bool,
}

pub fn cmd_features(
    cfg: &RunConfig,
    inputs: &InputPaths,
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<FeatureOutputs, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let cache_dir = cache_dir_for(out_dir);
    let mut manifest = load_manifest(&cache_dir)?;
    let stage_inputs: BTreeMap<String, String> = [
        ("edges".to_string(), digest_file(&inputs.edges)?),
        ("annotations".to_string(), digest_file(&inputs.annotations)?),
        ("hierarchy".to_string(), digest_file(&inputs.hierarchy)?),
        (
            "config".to_string(),
            sha256_hex(cfg.canonical_string().as_bytes()),
        ),
    ]
    .into();
    let outputs = FeatureOutputs {
        features_g: out_dir.join("features_g.tsv"),
        features_f: out_dir.join("features_f.tsv"),
        cached: true,
    };
    if !opts.force && stage_is_cached(&manifest, "features", &stage_inputs, out_dir) {
        log::info!("features: cache hit, stage skipped");
        return Ok(outputs);
    }
    let started = Instant::now();
    let dataset = load_dataset(inputs, opts.strict)?;
    let max_k = *cfg.cluster_counts.last().expect("validated non-empty");
    if max_k >= dataset.network.n_nodes() {
        return Err(PipelineError::Config(format!(
            "cluster count {max_k} must be below the {} network genes",
            dataset.network.n_nodes()
        )));
    }
    let (filtered_h, filtered_ann) = filter_functions(
        &dataset.annotations,
        &dataset.hierarchy,
        cfg.min_genes_per_function,
    );
    if filtered_h.n_terms() == 0 {
        log::warn!(
            "no function kept more than {} genes; feature matrices will be empty",
            cfg.min_genes_per_function
        );
    }
    let affinity = build_affinity(&dataset.network, &dataset.annotations)?;
    let eigen_opts = EigenOptions::default();
    let clusters_g = cluster_sweep(
        &dataset.network,
        &cfg.cluster_counts,
        cfg.seed,
        GraphTag::G,
        &eigen_opts,
    )?;
    let clusters_f = cluster_sweep(
        affinity.network(),
        &cfg.cluster_counts,
        cfg.seed,
        GraphTag::F,
        &eigen_opts,
    )?;
    let terms = filtered_h.terms().to_vec();
    let jg = enrich(&clusters_g, &filtered_ann, &terms, GraphTag::G)?;
    let jf = enrich(&clusters_f, &filtered_ann, &terms, GraphTag::F)?;

    let mut writer = StageWriter::new(out_dir)?;
    writer.add("features_g.tsv", &jg.to_tsv())?;
    writer.add("features_f.tsv", &jf.to_tsv())?;
    if opts.export_intermediates {
        writer.add("affinity.tsv", &affinity.network().to_edges_tsv())?;
        writer.add("clusters_g.tsv", &clusters_tsv(&clusters_g, GraphTag::G))?;
        writer.add("clusters_f.tsv", &clusters_tsv(&clusters_f, GraphTag::F))?;
    }
    let written = writer.commit()?;
    manifest.seed = cfg.seed;
    manifest.config_digest = stage_inputs["config"].clone();
    manifest.stages.insert(
        "features".to_string(),
        StageRecord {
            inputs: stage_inputs,
            outputs: written,
            elapsed_ms: started.elapsed().as_millis() as u64,
        },
    );
    save_manifest(&cache_dir, &manifest)?;
    Ok(FeatureOutputs {
        cached: false,
        ..outputs
    })
}

// ---------------------------------------------------------------------------
// predict

#[derive(Clone, Debug)]
pub struct PredictInputs {
    pub features_g: PathBuf,
    pub features_f: PathBuf,
    pub annotations: PathBuf,
    pub hierarchy: PathBuf,
}

#[derive(Clone, Debug)]
pub struct PredictOutputs {
    pub predictions: BTreeMap<String, PathBuf>,
    pub selection_detail: BTreeMap<String, PathBuf>,
    pub selection_summary: BTreeMap<String, PathBuf>,
    pub cached: bool,
}

/// Everything the training stage needs about one sub-hierarchy.
struct PreparedSub {
    sub: SubHierarchy,
    features: FeatureMatrix,
    folds: crate::learn::FoldPlan,
}

fn prepare_subs(
    cfg: &RunConfig,
    jg: &FeatureMatrix,
    jf: &FeatureMatrix,
    annotations_path: &Path,
    hierarchy_path: &Path,
) -> Result<(AnnotationMap, Vec<PreparedSub>), PipelineError> {
    if jg.genes != jf.genes {
        return Err(PipelineError::Enrich(EnrichError::GeneOrderMismatch));
    }
    let hierarchy = Hierarchy::from_records(&ingest::parse_hierarchy(hierarchy_path)?)?;
    let raw = AnnotationMap::from_pairs(
        &ingest::parse_annotations(annotations_path)?,
        Some(&jg.genes),
        hierarchy.terms(),
    )?;
    let closed = true_path_close(&raw, &hierarchy)?;
    let (filtered_h, filtered_ann) =
        filter_functions(&closed, &hierarchy, cfg.min_genes_per_function);
    let subs = split_subhierarchies(
        &filtered_h,
        &filtered_ann,
        cfg.min_functions_per_subhierarchy,
    )?;
    let mut prepared = Vec::with_capacity(subs.len());
    for sub in subs {
        if sub.gene_set.len() < cfg.folds {
            return Err(PipelineError::Learn(LearnError::TooFewSamples {
                folds: cfg.folds,
                samples: sub.gene_set.len(),
            }));
        }
        let jg_slice = jg.slice(&sub.gene_set, &sub.terms)?;
        let jf_slice = jf.slice(&sub.gene_set, &sub.terms)?;
        let features = concat_features(&jg_slice, &jf_slice)?;
        // One fold plan per sub-hierarchy, shared by all strategies:
        // stratified over the multi-label matrix of the non-root terms.
        let mut labels = LabelMatrix::zeros(sub.gene_set.len(), sub.n_terms().saturating_sub(1));
        for (g, gene) in sub.gene_set.iter().enumerate() {
            let mut j = 0;
            for t in 0..sub.n_terms() {
                if t == sub.root {
                    continue;
                }
                if filtered_ann.has(gene, &sub.terms[t]) {
                    labels.set(g, j, true);
                }
                j += 1;
            }
        }
        let folds = stratified_kfold(
            &labels,
            cfg.folds,
            derive_seed(cfg.seed, &format!("folds/{}", sub.root_name())),
        )?;
        prepared.push(PreparedSub {
            sub,
            features,
            folds,
        });
    }
    Ok((filtered_ann, prepared))
}

fn train_options(cfg: &RunConfig) -> TrainOptions {
    TrainOptions {
        forest: ForestParams {
            n_trees: cfg.forest_trees,
            min_samples_split: cfg.forest_min_split,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0, // per-unit seeds derived inside train_strategy
        },
        selection_cutoff: cfg.selection_cutoff,
        seed: cfg.seed,
    }
}

fn selection_detail_tsv(rows: &[(String, SelectionRecord)]) -> String {
    let mut out = String::from("# root\tunit\tfold\tcolumn\timportance\tselected\n");
    for (root, r) in rows {
        writeln!(
            out,
            "{root}\t{}\t{}\t{}\t{}\t{}",
            r.unit,
            r.fold,
            r.column,
            r.importance,
            u8::from(r.selected)
        )
        .unwrap();
    }
    out
}

/// Per-root totals in the shape of the filtered-feature table: candidate
/// and selected counts (fold-averaged), split by source graph.
fn selection_summary_tsv(rows: &[(String, SelectionRecord)], n_folds: usize) -> String {
    let mut per_root: BTreeMap<&str, (usize, usize, usize, usize)> = BTreeMap::new();
    for (root, r) in rows {
        let entry = per_root.entry(root).or_default();
        entry.0 += 1;
        if r.selected {
            entry.1 += 1;
            if r.column.starts_with("G|") {
                entry.2 += 1;
            } else {
                entry.3 += 1;
            }
        }
    }
    let mut out = String::from(
        "# root\ttotal_features\tfiltered_features\tselected_from_g\tselected_from_f\n",
    );
    let avg = |count: usize| (count as f64 / n_folds as f64).round() as usize;
    for (root, (total, selected, from_g, from_f)) in per_root {
        writeln!(
            out,
            "{root}\t{}\t{}\t{}\t{}",
            avg(total),
            avg(selected),
            avg(from_g),
            avg(from_f)
        )
        .unwrap();
    }
    out
}

pub fn cmd_predict(
    cfg: &RunConfig,
    inputs: &PredictInputs,
    methods: &[StrategyKind],
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<PredictOutputs, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let cache_dir = cache_dir_for(out_dir);
    let mut manifest = load_manifest(&cache_dir)?;
    let stage_inputs: BTreeMap<String, String> = [
        ("features_g".to_string(), digest_file(&inputs.features_g)?),
        ("features_f".to_string(), digest_file(&inputs.features_f)?),
        ("annotations".to_string(), digest_file(&inputs.annotations)?),
        ("hierarchy".to_string(), digest_file(&inputs.hierarchy)?),
        (
            "config".to_string(),
            sha256_hex(cfg.canonical_string().as_bytes()),
        ),
    ]
    .into();
    let mut outputs = PredictOutputs {
        predictions: BTreeMap::new(),
        selection_detail: BTreeMap::new(),
        selection_summary: BTreeMap::new(),
        cached: false,
    };
    for method in methods {
        outputs
            .predictions
            .insert(method.to_string(), out_dir.join(format!("predictions_{method}.tsv")));
        outputs
            .selection_detail
            .insert(method.to_string(), out_dir.join(format!("selection_{method}.tsv")));
        outputs.selection_summary.insert(
            method.to_string(),
            out_dir.join(format!("selection_summary_{method}.tsv")),
        );
    }
    let pending: Vec<StrategyKind> = methods
        .iter()
        .copied()
        .filter(|m| {
            opts.force || !stage_is_cached(&manifest, &format!("predict:{m}"), &stage_inputs, out_dir)
        })
        .collect();
    if pending.is_empty() {
        log::info!("predict: cache hit for every method, stage skipped");
        outputs.cached = true;
        return Ok(outputs);
    }
    let jg = FeatureMatrix::read_tsv(&inputs.features_g)?;
    let jf = FeatureMatrix::read_tsv(&inputs.features_f)?;
    let (filtered_ann, prepared) =
        prepare_subs(cfg, &jg, &jf, &inputs.annotations, &inputs.hierarchy)?;
    let train_opts = train_options(cfg);
    for method in pending {
        let started = Instant::now();
        let mut tables = Vec::new();
        let mut selection_rows: Vec<(String, SelectionRecord)> = Vec::new();
        for p in &prepared {
            let plan = hmc::plan(method, &p.sub);
            let (raw, records) =
                hmc::train_strategy(&plan, &p.sub, &p.features, &filtered_ann, &p.folds, &train_opts)?;
            let table = hmc::propagate(raw, &p.sub);
            selection_rows.extend(
                records
                    .into_iter()
                    .map(|r| (p.sub.root_name().to_string(), r)),
            );
            tables.push(table);
        }
        tables.sort_by(|a, b| a.root.cmp(&b.root));
        let mut writer = StageWriter::new(out_dir)?;
        writer.add(&format!("predictions_{method}.tsv"), &predictions_tsv(&tables))?;
        writer.add(
            &format!("selection_{method}.tsv"),
            &selection_detail_tsv(&selection_rows),
        )?;
        writer.add(
            &format!("selection_summary_{method}.tsv"),
            &selection_summary_tsv(&selection_rows, cfg.folds),
        )?;
        let written = writer.commit()?;
        manifest.stages.insert(
            format!("predict:{method}"),
            StageRecord {
                inputs: stage_inputs.clone(),
                outputs: written,
                elapsed_ms: started.elapsed().as_millis() as u64,
            },
        );
        save_manifest(&cache_dir, &manifest)?;
    }
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Clone, Debug)]
pub struct EvaluateOutputs {
    pub metrics: PathBuf,
    pub curves: PathBuf,
}

/// Rebuild the scoring truth exactly as the prediction stage saw it:
/// closed annotations over the prediction gene universe, filtered by the
/// same gene-count threshold.
fn scoring_truth(
    cfg: &RunConfig,
    gene_universe: &[String],
    annotations_path: &Path,
    hierarchy_path: &Path,
) -> Result<AnnotationMap, PipelineError> {
    let hierarchy = Hierarchy::from_records(&ingest::parse_hierarchy(hierarchy_path)?)?;
    let raw = AnnotationMap::from_pairs(
        &ingest::parse_annotations(annotations_path)?,
        Some(gene_universe),
        hierarchy.terms(),
    )?;
    let closed = true_path_close(&raw, &hierarchy)?;
    let (_, filtered_ann) = filter_functions(&closed, &hierarchy, cfg.min_genes_per_function);
    Ok(filtered_ann)
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    prediction_paths: &[PathBuf],
    annotations_path: &Path,
    hierarchy_path: &Path,
    out_dir: &Path,
) -> Result<EvaluateOutputs, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    if prediction_paths.is_empty() {
        return Err(PipelineError::BadInput("no prediction files given".into()));
    }
    let mut tables: Vec<PredictionTable> = Vec::new();
    for path in prediction_paths {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        tables.extend(
            parse_predictions_tsv(&text)
                .map_err(|e| PipelineError::BadInput(format!("{}: {e}", path.display())))?,
        );
    }
    if tables.is_empty() {
        return Err(PipelineError::BadInput(
            "prediction files contain no sub-hierarchies".into(),
        ));
    }
    tables.sort_by(|a, b| (&a.root, &a.method).cmp(&(&b.root, &b.method)));
    let mut universe: Vec<String> = tables.iter().flat_map(|t| t.genes.clone()).collect();
    universe.sort();
    universe.dedup();
    let truth = scoring_truth(cfg, &universe, annotations_path, hierarchy_path)?;

    let mut metrics = String::from("# sub_hierarchy_root\tmethod\tmetric\tvalue\n");
    let mut curves = String::from("# sub_hierarchy_root\tmethod\tterm\tthreshold\tprecision\trecall\n");
    for table in &tables {
        let report = eval::evaluate_table(table, &truth)?;
        metrics.push_str(&eval::metrics_rows(&table.root, &table.method, &report));
        curves.push_str(&eval::curves_rows(&table.root, &table.method, table, &truth)?);
    }
    let mut writer = StageWriter::new(out_dir)?;
    writer.add("metrics.tsv", &metrics)?;
    writer.add("curves.tsv", &curves)?;
    writer.commit()?;
    Ok(EvaluateOutputs {
        metrics: out_dir.join("metrics.tsv"),
        curves: out_dir.join("curves.tsv"),
    })
}

// ---------------------------------------------------------------------------
// ablate

#[derive(Clone, Debug)]
pub struct AblateOutputs {
    pub table: PathBuf,
}

/// Train the global strategy on J_G alone, J_F alone, and their
/// concatenation, and report micro/macro areas side by side.
pub fn cmd_ablate(
    cfg: &RunConfig,
    inputs: &PredictInputs,
    out_dir: &Path,
    _opts: &PipelineOptions,
) -> Result<AblateOutputs, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let jg = FeatureMatrix::read_tsv(&inputs.features_g)?;
    let jf = FeatureMatrix::read_tsv(&inputs.features_f)?;
    let (filtered_ann, prepared) =
        prepare_subs(cfg, &jg, &jf, &inputs.annotations, &inputs.hierarchy)?;
    let train_opts = train_options(cfg);
    let mut rows = String::from("# root\tvariant\tmicro_auprc\tmacro_auprc\n");
    for p in &prepared {
        let plan = hmc::plan(StrategyKind::Global, &p.sub);
        let jg_slice = jg.slice(&p.sub.gene_set, &p.sub.terms)?;
        let jf_slice = jf.slice(&p.sub.gene_set, &p.sub.terms)?;
        for (variant, features) in [
            ("g_only", &jg_slice),
            ("f_only", &jf_slice),
            ("both", &p.features),
        ] {
            let (raw, _) =
                hmc::train_strategy(&plan, &p.sub, features, &filtered_ann, &p.folds, &train_opts)?;
            let table = hmc::propagate(raw, &p.sub);
            let report = eval::evaluate_table(&table, &filtered_ann)?;
            writeln!(
                rows,
                "{}\t{variant}\t{}\t{}",
                p.sub.root_name(),
                report.micro_auprc,
                report.macro_auprc
            )
            .unwrap();
        }
    }
    let mut writer = StageWriter::new(out_dir)?;
    writer.add("ablation.tsv", &rows)?;
    writer.commit()?;
    Ok(AblateOutputs {
        table: out_dir.join("ablation.tsv"),
    })
}

// ---------------------------------------------------------------------------
// run-all

#[derive(Clone, Debug)]
pub struct RunAllOutputs {
    pub features: FeatureOutputs,
    pub predictions: PredictOutputs,
    pub evaluation: EvaluateOutputs,
}

pub fn cmd_run_all(
    cfg: &RunConfig,
    inputs: &InputPaths,
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<RunAllOutputs, PipelineError> {
    let features = cmd_features(cfg, inputs, out_dir, opts)?;
    let predict_inputs = PredictInputs {
        features_g: features.features_g.clone(),
        features_f: features.features_f.clone(),
        annotations: inputs.annotations.clone(),
        hierarchy: inputs.hierarchy.clone(),
    };
    let predictions = cmd_predict(cfg, &predict_inputs, &StrategyKind::ALL, out_dir, opts)?;
    let prediction_paths: Vec<PathBuf> = predictions.predictions.values().cloned().collect();
    let evaluation = cmd_evaluate(
        cfg,
        &prediction_paths,
        &inputs.annotations,
        &inputs.hierarchy,
        out_dir,
    )?;
    Ok(RunAllOutputs {
        features,
        predictions,
        evaluation,
    })
}
