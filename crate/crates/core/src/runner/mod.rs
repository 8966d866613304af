//! Sweep orchestration: splits, paired training, probing, records, reports.

mod config;
mod report;
mod sweep;
mod svg;

use std::path::PathBuf;

pub use config::{
    default_output_root, ExperimentConfig, Level, ModelKind, OodProbe, DEFAULT_ALPHAS, EXCLUDED_PARTITIONS,
    IN_DISTRIBUTION, OUTPUT_ENV,
};
pub use report::{report, MiRow, ReportOptions, ReportOutcome, SummaryRow};
pub use sweep::{reconstruct_split, run_sweep, RunEntry, RunManifest, RunStatus, SweepOptions, SweepOutcome};
pub use svg::{trend_plot, Series};

use crate::analysis::AnalysisError;
use crate::simmetrics::SimError;
use crate::splitkit::SplitError;
use crate::synthgen::SynthError;
use crate::tinynet::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Similarity(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Resume(String),
}

impl RunnerError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            RunnerError::Config(_) => "config",
            RunnerError::Synth(_) => "synth",
            RunnerError::Split(_) => "split",
            RunnerError::Train(_) => "train",
            RunnerError::Similarity(_) => "similarity",
            RunnerError::Analysis(_) => "analysis",
            RunnerError::Io { .. } => "io",
            RunnerError::Resume(_) => "resume",
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> RunnerError {
    let path = path.into();
    move |source| RunnerError::Io { path, source }
}
