//! Gene-function association prediction from weighted co-expression
//! networks.
//!
//! The pipeline re-weights the network with annotation overlap (the affinity
//! graph), spectral-clusters both graphs over a sweep of cluster counts,
//! turns cluster memberships into per-(gene, function) enrichment p-value
//! features, selects features by mean absolute SHAP value with a cumulative
//! cutoff, trains hierarchy-aware random-forest classifiers (lcn, lcpn, lcl,
//! global) under stratified k-fold cross-validation, enforces the true-path
//! rule by cumulative probabilities, and reports precision-recall metrics.
//!
//! Each stage is usable on its own; `pipeline` wires them end to end and the
//! `gannet` binary exposes the batch subcommands. The `examples/` directory
//! walks through every capability on small synthetic data.

pub mod enrichment;
pub mod eval;
pub mod explain;
pub mod graph;
pub mod hmc;
pub mod ingest;
pub mod learn;
pub mod ontology;
pub mod pipeline;
pub mod spectral;
pub mod synth;
pub mod util;

pub use ingest::RunConfig;
