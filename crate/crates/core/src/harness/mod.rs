//! Seeded experiment runner: configuration, worker pool, CSV/SVG artifacts.

mod config;
mod plot;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{action_mix, default_max_nodes, parse_config, parse_value, Budget, ExperimentConfig, Mode, Preset, SweepSpec};
pub use plot::{emit_plot, render_bars, render_heatmap, render_plot, PlotStyle, Series};
pub use run::{average_progress, average_success, report, run, RunReport};

use crate::learner::LearnerError;
use crate::nn::NnError;
use crate::planner::PlannerError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },
    #[error("output directory {0} exists and is not empty (use --force to replace a previous run)")]
    OutputExists(PathBuf),
    #[error("report check failed: {0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl HarnessError {
    /// Process exit code: 2 for configuration and output-directory errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::OutputExists(_) => 2,
            _ => 1,
        }
    }
}
