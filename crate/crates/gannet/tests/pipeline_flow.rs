//! Pipeline-level behavior: digest caching, crash safety, the ablation
//! table, bit-exact re-evaluation from prediction files, and the CLI
//! binary's exit codes.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;

use gannet::eval;
use gannet::hmc::parse_predictions_tsv;
use gannet::ingest::RunConfig;
use gannet::ontology::{filter_functions, true_path_close, AnnotationMap, Hierarchy};
use gannet::pipeline::{
    cmd_ablate, cmd_evaluate, cmd_features, cmd_predict, cmd_run_all, InputPaths, PipelineError,
    PipelineOptions, PredictInputs,
};
use gannet::synth::{generate, write_dataset, HierarchyShape, SynthSpec};

fn small_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_genes: 80,
        n_blocks: 3,
        in_block_edge_prob: 0.6,
        in_block_weight_range: (1.0, 5.0),
        cross_block_edge_prob: 0.02,
        hierarchy_shape: HierarchyShape::BinaryTree(6),
        signal: 0.6,
        noise: 0.05,
        seed,
    }
}

fn small_config() -> RunConfig {
    RunConfig {
        cluster_counts: vec![2, 3],
        folds: 3,
        min_genes_per_function: 4,
        min_functions_per_subhierarchy: 3,
        forest_trees: 30,
        forest_min_split: 5,
        selection_cutoff: 0.9,
        seed: 5,
    }
}

fn write_inputs(dir: &std::path::Path, seed: u64) -> InputPaths {
    let data = generate(&small_spec(seed)).unwrap();
    let paths = write_dataset(&data, dir).unwrap();
    InputPaths {
        edges: paths.edges,
        annotations: paths.annotations,
        hierarchy: paths.hierarchy,
    }
}

#[test]
fn feature_cache_hits_and_invalidates() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(&dir.path().join("data"), 1);
    let cfg = small_config();
    let out = dir.path().join("out");
    let opts = PipelineOptions::default();

    let first = cmd_features(&cfg, &inputs, &out, &opts).unwrap();
    assert!(!first.cached);
    let second = cmd_features(&cfg, &inputs, &out, &opts).unwrap();
    assert!(second.cached, "unchanged inputs must hit the cache");

    // Any input byte change invalidates the stage.
    let mut edges = std::fs::read_to_string(&inputs.edges).unwrap();
    edges.push_str("# trailing comment\n");
    std::fs::write(&inputs.edges, edges).unwrap();
    let third = cmd_features(&cfg, &inputs, &out, &opts).unwrap();
    assert!(!third.cached, "changed input must invalidate the cache");

    // A config change invalidates too.
    let mut cfg2 = cfg.clone();
    cfg2.seed = 6;
    let fourth = cmd_features(&cfg2, &inputs, &out, &opts).unwrap();
    assert!(!fourth.cached);

    // Deleting an output file forces recomputation even with equal digests.
    std::fs::remove_file(&first.features_g).unwrap();
    let fifth = cmd_features(&cfg2, &inputs, &out, &opts).unwrap();
    assert!(!fifth.cached);
    assert!(first.features_g.exists());
}

#[test]
fn oversized_cluster_count_fails_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(&dir.path().join("data"), 2);
    let mut cfg = small_config();
    cfg.cluster_counts = vec![2, 500]; // >= |V| = 80
    let out = dir.path().join("out");
    let err = cmd_features(&cfg, &inputs, &out, &PipelineOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)), "got {err:?}");
    assert_eq!(err.exit_code(), 1);
    // The failed stage leaves nothing behind: no outputs, no manifest entry.
    assert!(!out.join("features_g.tsv").exists());
    assert!(!out.join("features_f.tsv").exists());
    let manifest = gannet::pipeline::load_manifest(&out).unwrap();
    assert!(manifest.stages.is_empty());
    let leftovers: Vec<_> = match std::fs::read_dir(&out) {
        Ok(entries) => entries
            .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
            .filter(|name| name.ends_with(".tmp"))
            .collect(),
        Err(_) => Vec::new(),
    };
    assert!(leftovers.is_empty(), "stray temp files: {leftovers:?}");
}

#[test]
fn run_all_emits_complete_tables() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(&dir.path().join("data"), 3);
    let cfg = small_config();
    let out = dir.path().join("out");
    let outputs = cmd_run_all(&cfg, &inputs, &out, &PipelineOptions::default()).unwrap();

    assert_eq!(outputs.predictions.predictions.len(), 4);
    let metrics = std::fs::read_to_string(&outputs.evaluation.metrics).unwrap();
    let rows: Vec<&str> = metrics.lines().filter(|l| !l.starts_with('#')).collect();
    // One sub-hierarchy here: rows = subs x methods x 3 metrics.
    assert_eq!(rows.len(), 4 * 3); // 1 sub-hierarchy x 4 methods x 3 metrics
    for row in &rows {
        let fields: Vec<&str> = row.split('\t').collect();
        assert_eq!(fields.len(), 4);
        let value: f64 = fields[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&value));
    }
    let curves = std::fs::read_to_string(&outputs.evaluation.curves).unwrap();
    assert!(curves.lines().any(|l| l.contains("\tALL\t")));

    // The J matrices have |A| * |K| columns per graph tag.
    let features = std::fs::read_to_string(&outputs.features.features_g).unwrap();
    let header: Vec<&str> = features.lines().next().unwrap().split('\t').collect();
    let hierarchy = Hierarchy::from_records(
        &gannet::ingest::parse_hierarchy(&inputs.hierarchy).unwrap(),
    )
    .unwrap();
    let raw = AnnotationMap::from_pairs(
        &gannet::ingest::parse_annotations(&inputs.annotations).unwrap(),
        None,
        hierarchy.terms(),
    )
    .unwrap();
    let closed = true_path_close(&raw, &hierarchy).unwrap();
    let (fh, _) = filter_functions(&closed, &hierarchy, cfg.min_genes_per_function);
    assert_eq!(header.len() - 1, fh.n_terms() * cfg.cluster_counts.len());
}

#[test]
fn metrics_reproduce_from_prediction_files_alone() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(&dir.path().join("data"), 4);
    let cfg = small_config();
    let out = dir.path().join("out");
    let outputs = cmd_run_all(&cfg, &inputs, &out, &PipelineOptions::default()).unwrap();

    // Rebuild the scoring truth and recompute every metric from the
    // emitted prediction files; the metrics.tsv bytes must match.
    let mut tables = Vec::new();
    for path in outputs.predictions.predictions.values() {
        let text = std::fs::read_to_string(path).unwrap();
        tables.extend(parse_predictions_tsv(&text).unwrap());
    }
    tables.sort_by(|a, b| (&a.root, &a.method).cmp(&(&b.root, &b.method)));
    let hierarchy = Hierarchy::from_records(
        &gannet::ingest::parse_hierarchy(&inputs.hierarchy).unwrap(),
    )
    .unwrap();
    let mut universe: Vec<String> = tables.iter().flat_map(|t| t.genes.clone()).collect();
    universe.sort();
    universe.dedup();
    let raw = AnnotationMap::from_pairs(
        &gannet::ingest::parse_annotations(&inputs.annotations).unwrap(),
        Some(&universe),
        hierarchy.terms(),
    )
    .unwrap();
    let closed = true_path_close(&raw, &hierarchy).unwrap();
    let (_, truth) = filter_functions(&closed, &hierarchy, cfg.min_genes_per_function);

    let mut rebuilt = String::from("# sub_hierarchy_root\tmethod\tmetric\tvalue\n");
    for table in &tables {
        let report = eval::evaluate_table(table, &truth).unwrap();
        rebuilt.push_str(&eval::metrics_rows(&table.root, &table.method, &report));
    }
    let emitted = std::fs::read_to_string(&outputs.evaluation.metrics).unwrap();
    assert_eq!(rebuilt, emitted, "metrics must be reproducible bit-exactly");
}

#[test]
fn ablation_has_three_variants_per_subhierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(&dir.path().join("data"), 6);
    let cfg = small_config();
    let out = dir.path().join("out");
    let features = cmd_features(&cfg, &inputs, &out, &PipelineOptions::default()).unwrap();
    let predict_inputs = PredictInputs {
        features_g: features.features_g.clone(),
        features_f: features.features_f.clone(),
        annotations: inputs.annotations.clone(),
        hierarchy: inputs.hierarchy.clone(),
    };
    let ablate = cmd_ablate(&cfg, &predict_inputs, &out, &PipelineOptions::default()).unwrap();
    let table = std::fs::read_to_string(&ablate.table).unwrap();
    let mut per_root: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for line in table.lines().filter(|l| !l.starts_with('#')) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 4);
        per_root
            .entry(fields[0].to_string())
            .or_default()
            .insert(fields[1].to_string(), fields[2].parse().unwrap());
    }
    for (root, variants) in &per_root {
        assert_eq!(variants.len(), 3, "{root} must have exactly 3 variant rows");
        // Measured on this seeded harness: the combined features hold up
        // against the better single source.
        let single_best = variants["g_only"].max(variants["f_only"]);
        assert!(
            variants["both"] >= single_best - 0.02,
            "{root}: both {} vs single best {single_best}",
            variants["both"]
        );
    }
}

#[test]
fn strict_mode_rejects_unclosed_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    std::fs::create_dir_all(&data_dir).unwrap();
    std::fs::write(
        data_dir.join("edges.tsv"),
        "g1\tg2\t2.0\ng2\tg3\t3.0\ng1\tg3\t1.5\n",
    )
    .unwrap();
    // g1 carries the child term but not its parent.
    std::fs::write(data_dir.join("annotations.tsv"), "g1\tchild\ng2\tparent\n").unwrap();
    std::fs::write(data_dir.join("hierarchy.tsv"), "child\tparent\n").unwrap();
    let inputs = InputPaths {
        edges: data_dir.join("edges.tsv"),
        annotations: data_dir.join("annotations.tsv"),
        hierarchy: data_dir.join("hierarchy.tsv"),
    };
    let strict = PipelineOptions {
        strict: true,
        ..PipelineOptions::default()
    };
    let err = cmd_features(
        &small_config(),
        &inputs,
        &dir.path().join("out"),
        &strict,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        PipelineError::Ontology(gannet::ontology::OntologyError::ClosureViolation { .. })
    ));
    assert_eq!(err.exit_code(), 1);
    // The default mode closes silently instead.
    let lenient = gannet::pipeline::load_dataset(&inputs, false).unwrap();
    assert!(lenient.annotations.has("g1", "parent"));
}

#[test]
fn predict_honors_method_subsets() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(&dir.path().join("data"), 7);
    let cfg = small_config();
    let out = dir.path().join("out");
    let features = cmd_features(&cfg, &inputs, &out, &PipelineOptions::default()).unwrap();
    let predict_inputs = PredictInputs {
        features_g: features.features_g.clone(),
        features_f: features.features_f.clone(),
        annotations: inputs.annotations.clone(),
        hierarchy: inputs.hierarchy.clone(),
    };
    let outputs = cmd_predict(
        &cfg,
        &predict_inputs,
        &[gannet::hmc::StrategyKind::Global],
        &out,
        &PipelineOptions::default(),
    )
    .unwrap();
    assert_eq!(outputs.predictions.len(), 1);
    let path = &outputs.predictions["global"];
    let text = std::fs::read_to_string(path).unwrap();
    let tables = parse_predictions_tsv(&text).unwrap();
    assert!(tables.iter().all(|t| t.method == "global"));

    // Second call with identical inputs is a cache hit.
    let again = cmd_predict(
        &cfg,
        &predict_inputs,
        &[gannet::hmc::StrategyKind::Global],
        &out,
        &PipelineOptions::default(),
    )
    .unwrap();
    assert!(again.cached);

    // Evaluate the emitted file.
    let eval_out = dir.path().join("eval");
    let evaluated = cmd_evaluate(
        &cfg,
        std::slice::from_ref(path),
        &inputs.annotations,
        &inputs.hierarchy,
        &eval_out,
    )
    .unwrap();
    assert!(evaluated.metrics.exists());
    assert!(evaluated.curves.exists());
}

#[test]
fn cli_binary_round_trip() {
    let bin = env!("CARGO_BIN_EXE_gannet");
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .env("RUST_LOG", "warn")
            .output()
            .expect("binary runs")
    };
    let data_str = data_dir.to_string_lossy().to_string();
    let synth = run(&[
        "synth",
        "--out",
        &data_str,
        "--n-genes",
        "70",
        "--n-blocks",
        "3",
        "--hierarchy-shape",
        "binary-tree",
        "--n-terms",
        "6",
        "--signal",
        "0.6",
        "--noise",
        "0.05",
        "--seed",
        "17",
    ]);
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));

    let cfg_path = dir.path().join("config.txt");
    std::fs::write(
        &cfg_path,
        "cluster_counts=2,3\nfolds=3\nmin_genes_per_function=4\nmin_functions_per_subhierarchy=3\nforest_trees=25\nseed=3\n",
    )
    .unwrap();
    let edges = data_dir.join("edges.tsv");
    let annotations = data_dir.join("annotations.tsv");
    let hierarchy = data_dir.join("hierarchy.tsv");
    let out = dir.path().join("run");

    let validate = run(&[
        "validate",
        "--edges",
        edges.to_str().unwrap(),
        "--annotations",
        annotations.to_str().unwrap(),
        "--hierarchy",
        hierarchy.to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert!(validate.status.success());
    let stdout = String::from_utf8_lossy(&validate.stdout);
    assert!(stdout.contains("genes\t70"), "{stdout}");

    let run_all = run(&[
        "run-all",
        "--edges",
        edges.to_str().unwrap(),
        "--annotations",
        annotations.to_str().unwrap(),
        "--hierarchy",
        hierarchy.to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(run_all.status.success(), "{}", String::from_utf8_lossy(&run_all.stderr));
    assert!(out.join("metrics.tsv").exists());
    for method in ["lcn", "lcpn", "lcl", "global"] {
        assert!(out.join(format!("predictions_{method}.tsv")).exists());
    }

    // The cache manifest can live elsewhere via the environment override.
    let cache_dir = dir.path().join("cache");
    let out2 = dir.path().join("run2");
    let with_env = Command::new(bin)
        .args([
            "features",
            "--edges",
            edges.to_str().unwrap(),
            "--annotations",
            annotations.to_str().unwrap(),
            "--hierarchy",
            hierarchy.to_str().unwrap(),
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
        ])
        .env("GANNET_CACHE_DIR", &cache_dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(with_env.status.success());
    assert!(cache_dir.join("manifest.json").exists());
    assert!(!out2.join("manifest.json").exists());

    // Config errors exit with code 1.
    std::fs::write(&cfg_path, "selection_cutoff=1.5\n").unwrap();
    let bad = run(&[
        "validate",
        "--edges",
        edges.to_str().unwrap(),
        "--annotations",
        annotations.to_str().unwrap(),
        "--hierarchy",
        hierarchy.to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));

    // Malformed data exits with code 1 as well.
    std::fs::write(data_dir.join("edges.tsv"), "g1\tg1\t2.0\n").unwrap();
    let selfloop = run(&[
        "validate",
        "--edges",
        edges.to_str().unwrap(),
        "--annotations",
        annotations.to_str().unwrap(),
        "--hierarchy",
        hierarchy.to_str().unwrap(),
    ]);
    assert_eq!(selfloop.status.code(), Some(1));
}

#[test]
fn perfect_oracle_predictions_score_one() {
    // Predictions copied straight from the truth: every metric hits 1.
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(&dir.path().join("data"), 9);
    let cfg = small_config();
    let hierarchy = Hierarchy::from_records(
        &gannet::ingest::parse_hierarchy(&inputs.hierarchy).unwrap(),
    )
    .unwrap();
    let raw = AnnotationMap::from_pairs(
        &gannet::ingest::parse_annotations(&inputs.annotations).unwrap(),
        None,
        hierarchy.terms(),
    )
    .unwrap();
    let closed = true_path_close(&raw, &hierarchy).unwrap();
    let (fh, fann) = filter_functions(&closed, &hierarchy, cfg.min_genes_per_function);
    let subs = gannet::ontology::split_subhierarchies(
        &fh,
        &fann,
        cfg.min_functions_per_subhierarchy,
    )
    .unwrap();
    let mut tables = Vec::new();
    for sh in &subs {
        let mut table = gannet::hmc::PredictionTable::new(
            sh.root_name().to_string(),
            "oracle".to_string(),
            sh.gene_set.clone(),
            sh.terms.clone(),
        );
        for (g, gene) in sh.gene_set.iter().enumerate() {
            for (t, term) in sh.terms.iter().enumerate() {
                table.set(g, t, f64::from(u8::from(fann.has(gene, term))));
            }
        }
        tables.push(table);
    }
    let pred_path = dir.path().join("oracle.tsv");
    std::fs::write(&pred_path, gannet::hmc::predictions_tsv(&tables)).unwrap();
    let out = dir.path().join("eval");
    let outputs = cmd_evaluate(
        &cfg,
        std::slice::from_ref(&pred_path),
        &inputs.annotations,
        &inputs.hierarchy,
        &out,
    )
    .unwrap();
    let metrics = std::fs::read_to_string(&outputs.metrics).unwrap();
    for line in metrics.lines().filter(|l| !l.starts_with('#')) {
        let value: f64 = line.split('\t').nth(3).unwrap().parse().unwrap();
        assert_eq!(value, 1.0, "oracle metrics must all be 1: {line}");
    }
}

#[test]
fn predictions_tsv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(&dir.path().join("data"), 8);
    let cfg = small_config();
    let out = dir.path().join("out");
    let outputs = cmd_run_all(&cfg, &inputs, &out, &PipelineOptions::default()).unwrap();
    let path: &PathBuf = &outputs.predictions.predictions["lcpn"];
    let text = std::fs::read_to_string(path).unwrap();
    let tables = parse_predictions_tsv(&text).unwrap();
    let rebuilt = gannet::hmc::predictions_tsv(&tables);
    assert_eq!(rebuilt, text, "serialize-parse-serialize must be identity");
}
