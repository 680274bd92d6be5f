//! Data ingestion, configuration, synthetic-data generation, metrics, and
//! run orchestration behind the CLI.

pub mod config;
pub mod metrics;
pub mod run;
pub mod synth;

pub use config::RunConfig;
pub use metrics::{rmse_and_coverage, MetricsRow};
pub use run::{
    cmd_bf_table, cmd_ess_bench, cmd_fit, cmd_simulate, grids_for, load_csv, run_fit,
    validate_summary, FitResult, HarnessError,
};
pub use synth::{generate_dataset, synth_f, SynthFamily};
