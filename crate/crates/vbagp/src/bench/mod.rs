//! Benchmark harness: registered reliability problems, comparison metrics,
//! and the replicated experiment runner with directory persistence.

pub mod experiment;
pub mod metrics;
pub mod problems;

pub use experiment::{
    aggregate, plot_data, read_runs, reference_run, run_experiment, write_experiment,
    ExperimentConfig, ExperimentReport, Method,
};
pub use metrics::{metric_e_r, metric_nu_mc};
pub use problems::{find, four_branch_g, oscillator_g, registry, ProblemSpec, Reference};
