//! Config-driven experiments: parse a JSON config, evaluate every grid cell,
//! emit CSV or JSON reports.

mod config;
mod report;
mod runner;

use std::path::PathBuf;

pub use config::{parse_config, ExperimentConfig, GammaSpec, OrderSpec, SetSpec, SweepAxes};
pub use report::{emit_report, write_csv, write_json, ReportFormat, CSV_HEADER};
pub use runner::{run_experiment, CellRecord, ExperimentRecord};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("report check failed: {0}")]
    Check(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// Process exit code: 1 config, 2 failed check, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::Check(_) => 2,
            ExperimentError::Io { .. } | ExperimentError::Csv(_) | ExperimentError::Json(_) => 3,
        }
    }
}
