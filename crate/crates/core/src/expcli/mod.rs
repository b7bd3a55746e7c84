//! Experiment orchestration, CSV/SVG reporting, and the CLI backend.

mod config;
mod output;
pub mod plot;
mod run;
mod trainer;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use config::{BaselineConfig, ExperimentConfig, LinkConfig, RunConfig, Surface};
pub use output::{write_all, write_baseline};
pub use run::{
    compare_to_baseline, mid_episode_power_bump, run_baseline, run_device, run_experiment, serve_experiment,
    trace_file, ExperimentReport, BASELINE, CONFIG_SNAPSHOT, FINAL_POLICY, LOSSES, TEST_RETURNS, TRAIN_RETURNS,
};
pub use trainer::{transitions, EpisodeSummary, LossRow, SacTrainer};

use crate::link::SessionError;
use crate::twin::TwinError;
use crate::weldsim::SimError;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, #[source] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Twin(TwinError),
    #[error("network: {0}")]
    Net(String),
    #[error("{0} thread panicked")]
    Thread(&'static str),
}
