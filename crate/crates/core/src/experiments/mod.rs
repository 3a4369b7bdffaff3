//! Experiment catalog: configuration, sweep runners, CSV/SVG output and the
//! verification suite.

mod config;
mod output;
mod runners;
pub mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use output::{emit_csv, emit_svg, read_csv, PlotKind};
pub use runners::{
    cells, check_records, eta_min, oscillatory_source, run_cell, run_experiment, run_experiment_with, solve_cell, Cell,
    CellRecord, CellSolution, Outcome, EFFECTIVITY_FLOOR, ETA_MIN,
};

use crate::boundary::BoundaryError;
use crate::correction::CorrectionError;
use crate::estimators::EstimatorError;
use crate::fem::FemError;
use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{cell}: {source}")]
    Mesh { cell: String, source: MeshError },
    #[error("{cell}: {source}")]
    Fem { cell: String, source: FemError },
    #[error("{cell}: {source}")]
    Boundary { cell: String, source: BoundaryError },
    #[error("{cell}: {source}")]
    Estimator { cell: String, source: EstimatorError },
    #[error("{cell}: {source}")]
    Correction { cell: String, source: CorrectionError },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("nothing to write")]
    NoRows,
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One line of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub shape: String,
    pub size: f64,
    pub alpha: Option<f64>,
    pub error_h1: f64,
    pub estimate: f64,
    pub component_avg: f64,
    pub component_navg: f64,
    pub effectivity: f64,
    pub dof: usize,
    pub runtime_ms: u64,
}
