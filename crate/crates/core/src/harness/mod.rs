//! Experiment configuration, orchestration and persistence.
//!
//! A [`RunConfig`] names a topology, a problem and a list of methods. Running
//! it yields a [`RunRecord`] that is fully determined by the configuration;
//! wall-clock columns are opt-in for that reason.

mod checks;
mod config;
mod export;
mod run;

pub use checks::{check_record, CheckResult, TRACKING_TOL};
pub use config::{preset, preset_names, AlgorithmSpec, AnalysisSpec, ProblemSpec, RunConfig, SweepEntry, TopologySpec};
pub use export::{export_csv, load_record, save_record, trace_csv, write_atomic, CSV_HEADER};
pub use run::{
    build_problem, run_algorithm, run_experiment, topology_sweep, AlgorithmRun, Problem, RunRecord, SpectraSummary,
    DIVERGENCE_LIMIT,
};
