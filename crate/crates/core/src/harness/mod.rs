//! Monte-Carlo comparison of the nominal, shrinkage and robust models:
//! metrics, replication and sweep orchestration, CSV output and SVG plots.

mod config;
mod io;
mod metrics;
mod plot;
mod sweep;

use thiserror::Error;

pub use config::{
    float_range, parse_float_list, parse_usize_list, rows_for, ExperimentConfig, Profile, SweepMode,
};
pub use io::{estimate_files, generate_bundle, EstimateReport, Manifest};
pub use metrics::{relative_objective, violation_metrics, MetricUndefinedError, TOL_VIOL, TRUE_OBJ_FLOOR};
pub use plot::{emit_plots, LineChart, CRITERIA};
pub use sweep::{
    aggregate, cells, failure_rate, run_records, run_replication, run_sweep, write_aggregates, write_records,
    AggregateRow, Cell, ExperimentRecord, Method, RecordKey, RecordStatus, SweepSummary, AGG_HEADER, CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Matrix(#[from] crate::matrix::MatrixError),
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error(transparent)]
    Shrinkage(#[from] crate::shrinkage::ShrinkageError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}
