//! Data-generating processes, experiment configs, the replication runner and
//! result files.

mod config;
mod generators;
mod output;
mod runner;

pub use config::{load_json, parse_json, DataSource, ExperimentSpec, MgfSpec, SampleSpec, SCHEMA_VERSION};
pub use generators::{holdout_misclassification, mcid_eta, Curve, GeneratorSpec, MCID_MARGIN};
pub use output::{
    read_radius_pairs, write_experiment, write_long_csv, write_results_csv, LONG_FILE, RESULTS_FILE, RESULTS_HEADER,
    SUMMARY_FILE,
};
pub use runner::{
    build_divergence, resolve_omega, run_experiment, run_replication, worker_count, ExperimentOutput, GridSummary,
    OmegaEntry, ResultRow, RunOptions, Summary,
};
