//! Trend and information analysis over experiment records.

mod aggregate;
mod mi;
mod records;
mod regression;

pub use aggregate::{aggregate, summarize, GroupStats};
pub use mi::{mutual_information, quantile_bins, weighted_mean_mi};
pub use records::{
    canonical_sort, format_value, load_records, overlap_value, read_records, save_records, write_records,
    ExperimentRecord, SplitType, HEADER,
};
pub use regression::{linear_regression, mean_trend, LevelStats, TrendSummary};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("empty input")]
    Empty,
    #[error("non-finite value")]
    NonFinite,
    #[error("x has no variance")]
    ConstantX,
    #[error("{xs} levels but {ys} values")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("at least 2 bins needed, got {0}")]
    TooFewBins(usize),
    #[error("at least 2 distinct levels needed")]
    TooFewLevels,
    #[error("records: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
