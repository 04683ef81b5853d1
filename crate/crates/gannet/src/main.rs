//! Batch CLI over the library pipeline. Subcommands map one-to-one onto
//! `gannet::pipeline` entry points; this binary only parses arguments,
//! builds the rayon pool, and translates errors into exit codes
//! (1 validation/config, 2 runtime/numeric).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gannet::hmc::StrategyKind;
use gannet::ingest::{load_config, RunConfig};
use gannet::pipeline::{
    cmd_ablate, cmd_evaluate, cmd_features, cmd_predict, cmd_run_all, cmd_synth, cmd_validate,
    InputPaths, PipelineError, PipelineOptions, PredictInputs,
};
use gannet::synth::{HierarchyShape, SynthSpec};

#[derive(Parser)]
#[command(
    name = "gannet",
    about = "Gene function prediction from co-expression networks",
    version
)]
struct Cli {
    /// Cap the rayon worker count (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
}

#[derive(Args, Clone)]
struct ConfigArg {
    /// Run configuration (key=value lines); missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig, PipelineError> {
        match &self.config {
            Some(path) => Ok(load_config(path)?),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the three input tables; print a summary.
    Validate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArg,
        /// Reject annotations that are not already true-path closed.
        #[arg(long)]
        strict: bool,
    },
    /// Generate a synthetic dataset with a known plant.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        n_genes: usize,
        #[arg(long, default_value_t = 3)]
        n_blocks: usize,
        #[arg(long, default_value_t = 0.6)]
        in_block_edge_prob: f64,
        #[arg(long, default_value_t = 0.02)]
        cross_block_edge_prob: f64,
        #[arg(long, default_value_t = 1.0)]
        weight_lo: f64,
        #[arg(long, default_value_t = 5.0)]
        weight_hi: f64,
        /// chain | star | binary-tree (sized by --n-terms), or custom
        /// (shape read from --hierarchy-file).
        #[arg(long, default_value = "chain")]
        hierarchy_shape: String,
        #[arg(long, default_value_t = 4)]
        n_terms: usize,
        /// Existing hierarchy.tsv supplying a custom shape.
        #[arg(long)]
        hierarchy_file: Option<PathBuf>,
        #[arg(long, default_value_t = 0.7)]
        signal: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the enrichment feature matrices J_G and J_F.
    Features {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        /// Also write the affinity edge list and cluster assignments.
        #[arg(long)]
        export_intermediates: bool,
    },
    /// Train HMC strategies and emit out-of-fold predictions.
    Predict {
        #[arg(long)]
        features_g: PathBuf,
        #[arg(long)]
        features_f: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        hierarchy: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// lcn | lcpn | lcl | global | all
        #[arg(long, default_value = "all")]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Score prediction files against the annotations.
    Evaluate {
        /// One or more predictions_*.tsv files.
        #[arg(long, required = true, num_args = 1..)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        hierarchy: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the global strategy on J_G only, J_F only, and both.
    Ablate {
        #[arg(long)]
        features_g: PathBuf,
        #[arg(long)]
        features_f: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        hierarchy: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Features, all four strategies, and evaluation in one go.
    RunAll {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn parse_methods(text: &str) -> Result<Vec<StrategyKind>, PipelineError> {
    if text == "all" {
        return Ok(StrategyKind::ALL.to_vec());
    }
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<StrategyKind>()
                .map_err(PipelineError::BadInput)
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Validate {
            data,
            config,
            strict,
        } => {
            let cfg = config.load()?;
            let inputs = InputPaths {
                edges: data.edges,
                annotations: data.annotations,
                hierarchy: data.hierarchy,
            };
            let summary = cmd_validate(&cfg, &inputs, strict)?;
            println!("genes\t{}", summary.n_genes);
            println!("edges\t{}", summary.n_edges);
            println!("terms\t{}", summary.n_terms);
            println!("annotation_pairs_closed\t{}", summary.n_annotation_pairs_closed);
            println!("hierarchy_roots\t{}", summary.n_roots);
            println!("sub_hierarchies\t{}", summary.n_subhierarchies);
            print!("{}", summary.subhierarchy_table);
        }
        Command::Synth {
            out,
            n_genes,
            n_blocks,
            in_block_edge_prob,
            cross_block_edge_prob,
            weight_lo,
            weight_hi,
            hierarchy_shape,
            n_terms,
            hierarchy_file,
            signal,
            noise,
            seed,
        } => {
            let shape = match (hierarchy_shape.as_str(), &hierarchy_file) {
                ("chain", None) => HierarchyShape::Chain(n_terms),
                ("star", None) => HierarchyShape::Star(n_terms),
                ("binary-tree", None) => HierarchyShape::BinaryTree(n_terms),
                ("custom", Some(path)) | (_, Some(path)) => {
                    let records = gannet::ingest::parse_hierarchy(path)?;
                    HierarchyShape::Custom(
                        records.into_iter().map(|r| (r.child, r.parent)).collect(),
                    )
                }
                (other, None) => {
                    return Err(PipelineError::BadInput(format!(
                        "unknown hierarchy shape '{other}' (and no --hierarchy-file)"
                    )))
                }
            };
            let spec = SynthSpec {
                n_genes,
                n_blocks,
                in_block_edge_prob,
                in_block_weight_range: (weight_lo, weight_hi),
                cross_block_edge_prob,
                hierarchy_shape: shape,
                signal,
                noise,
                seed,
            };
            let paths = cmd_synth(&spec, &out)?;
            println!("edges\t{}", paths.edges.display());
            println!("annotations\t{}", paths.annotations.display());
            println!("hierarchy\t{}", paths.hierarchy.display());
            println!("plant\t{}", paths.plant.display());
        }
        Command::Features {
            data,
            config,
            out,
            force,
            export_intermediates,
        } => {
            let cfg = config.load()?;
            let inputs = InputPaths {
                edges: data.edges,
                annotations: data.annotations,
                hierarchy: data.hierarchy,
            };
            let opts = PipelineOptions {
                force,
                export_intermediates,
                ..PipelineOptions::default()
            };
            let outputs = cmd_features(&cfg, &inputs, &out, &opts)?;
            println!(
                "features_g\t{}{}",
                outputs.features_g.display(),
                if outputs.cached { "\t(cached)" } else { "" }
            );
            println!(
                "features_f\t{}{}",
                outputs.features_f.display(),
                if outputs.cached { "\t(cached)" } else { "" }
            );
        }
        Command::Predict {
            features_g,
            features_f,
            annotations,
            hierarchy,
            config,
            method,
            out,
            force,
        } => {
            let cfg = config.load()?;
            let methods = parse_methods(&method)?;
            let inputs = PredictInputs {
                features_g,
                features_f,
                annotations,
                hierarchy,
            };
            let opts = PipelineOptions {
                force,
                ..PipelineOptions::default()
            };
            let outputs = cmd_predict(&cfg, &inputs, &methods, &out, &opts)?;
            for (method, path) in &outputs.predictions {
                println!("predictions[{method}]\t{}", path.display());
            }
        }
        Command::Evaluate {
            predictions,
            annotations,
            hierarchy,
            config,
            out,
        } => {
            let cfg = config.load()?;
            let outputs = cmd_evaluate(&cfg, &predictions, &annotations, &hierarchy, &out)?;
            println!("metrics\t{}", outputs.metrics.display());
            println!("curves\t{}", outputs.curves.display());
        }
        Command::Ablate {
            features_g,
            features_f,
            annotations,
            hierarchy,
            config,
            out,
        } => {
            let cfg = config.load()?;
            let inputs = PredictInputs {
                features_g,
                features_f,
                annotations,
                hierarchy,
            };
            let outputs = cmd_ablate(&cfg, &inputs, &out, &PipelineOptions::default())?;
            println!("ablation\t{}", outputs.table.display());
        }
        Command::RunAll {
            data,
            config,
            out,
            force,
        } => {
            let cfg = config.load()?;
            let inputs = InputPaths {
                edges: data.edges,
                annotations: data.annotations,
                hierarchy: data.hierarchy,
            };
            let opts = PipelineOptions {
                force,
                ..PipelineOptions::default()
            };
            let outputs = cmd_run_all(&cfg, &inputs, &out, &opts)?;
            for (method, path) in &outputs.predictions.predictions {
                println!("predictions[{method}]\t{}", path.display());
            }
            println!("metrics\t{}", outputs.evaluation.metrics.display());
            println!("curves\t{}", outputs.evaluation.curves.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(|| run(cli)),
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
