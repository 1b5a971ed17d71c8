//! Experiment orchestration: configuration, runs, sweeps and figure data.

mod config;
mod emit;
mod experiment;
mod metrics;

pub use config::{DatasetSpec, ExperimentConfig, Seeds};
pub use emit::{emit_comm_table, emit_fig_data, emit_json, emit_summary, parse_fig_data, write_experiment_outputs};
pub use experiment::{
    build_dataset, run_experiment, run_experiment_on, run_lq_sweep, run_straggler_comparison, train_federation,
    with_threads, RunSummary, SweepResult,
};
pub use metrics::MetricsLog;
