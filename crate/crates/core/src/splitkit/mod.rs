//! Training-set pairs with exactly controlled overlap: dataset splits share
//! a proportion of the examples of every partition, task splits share a
//! proportion of whole partitions, and task relabeling keeps the images fixed
//! while varying which attributes the labels encode.

mod manifest;
mod proportion;
mod relabel;
mod split;
mod verify;

pub use manifest::SplitManifest;
pub use proportion::{denominator_lcm, Proportion};
pub use relabel::{task_overlap_pair, TaskLevel};
pub use split::{
    dataset_split, task_split_partitions, DatasetSplitSpec, PartitionedDataset, SplitKind, SplitPair, SplitSide,
    TaskSplitSpec,
};
pub use verify::{verify_overlap, OverlapReport};

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error("invalid proportion `{0}`: expected a value in [0, 1]")]
    InvalidProportion(String),
    #[error("alpha {alpha} times {count} is not an integer")]
    NonIntegral { alpha: Proportion, count: usize },
    #[error("partition {partition:?} has {size} examples, {needed} needed")]
    PartitionTooSmall { partition: Option<u32>, size: usize, needed: usize },
    #[error("{needed} partitions needed, {available} available")]
    TooFewPartitions { needed: usize, available: usize },
    #[error("task splits need equally sized partitions")]
    Unbalanced,
    #[error("invalid partitioning: {0}")]
    InvalidPartition(String),
    #[error("unknown task overlap level `{0}`")]
    InvalidLevel(String),
    #[error("split manifest: {0}")]
    Manifest(String),
}
