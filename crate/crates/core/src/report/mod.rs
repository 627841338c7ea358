//! Experiment configuration, runs, output files and run comparison.

mod compare;
mod config;
mod run;
pub mod svg;

pub use compare::{compare_runs, Comparison, MetricDiff};
pub use config::{
    parse_config, parse_domain_spec, parse_polygon, read_polygon_file, DomainSpec, ExperimentConfig, ExperimentKind,
    DATA_NAMES,
};
pub use run::{cone_data, execute, run_experiment, write_outputs, Cell, Column, PointError, RunOutput, RunSummary, Table};
