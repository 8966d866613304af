use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::proportion::Proportion;
use super::SplitError;
use crate::rng::{rng_from, stream};
use crate::synthgen::LabeledSet;

/// Disjoint partitions (classes) of a source dataset's example ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionedDataset {
    partitions: BTreeMap<u32, Vec<usize>>,
    source_len: usize,
}

impl PartitionedDataset {
    pub fn new(partitions: BTreeMap<u32, Vec<usize>>, source_len: usize) -> Result<Self, SplitError> {
        let mut seen = BTreeSet::new();
        for (p, ids) in &partitions {
            for &id in ids {
                if id >= source_len {
                    return Err(SplitError::InvalidPartition(format!("id {id} in partition {p} exceeds source length {source_len}")));
                }
                if !seen.insert(id) {
                    return Err(SplitError::InvalidPartition(format!("id {id} appears in more than one partition")));
                }
            }
        }
        let partitions = partitions
            .into_iter()
            .map(|(p, mut ids)| {
                ids.sort_unstable();
                (p, ids)
            })
            .collect();
        Ok(Self { partitions, source_len })
    }

    /// One partition per class of `set`.
    pub fn from_labels(set: &LabeledSet, source_len: usize) -> Result<Self, SplitError> {
        let mut partitions: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (&id, &label) in set.ids.iter().zip(&set.labels) {
            partitions.entry(label).or_default().push(id);
        }
        Self::new(partitions, source_len)
    }

    pub fn partitions(&self) -> &BTreeMap<u32, Vec<usize>> {
        &self.partitions
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn min_partition_size(&self) -> usize {
        self.partitions.values().map(Vec::len).min().unwrap_or(0)
    }

    pub fn partition_of(&self) -> BTreeMap<usize, u32> {
        self.partitions
            .iter()
            .flat_map(|(&p, ids)| ids.iter().map(move |&id| (id, p)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplitSpec {
    pub alpha: Proportion,
    /// Examples per partition on each side; defaults to half the smallest
    /// partition so every alpha is feasible.
    pub per_partition: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSplitSpec {
    pub alpha: Proportion,
    /// Partitions per side; defaults to half the partition count.
    pub partitions_per_side: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Dataset,
    TaskPartition,
}

/// One side of a split: example ids (ascending), the source partition of
/// each, and dense training labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSide {
    pub ids: Vec<usize>,
    pub partitions: Vec<u32>,
    pub labels: Vec<u32>,
    pub class_count: u32,
}

impl SplitSide {
    fn build(mut members: Vec<(usize, u32)>, label_map: &BTreeMap<u32, u32>) -> Self {
        members.sort_unstable();
        Self {
            ids: members.iter().map(|m| m.0).collect(),
            partitions: members.iter().map(|m| m.1).collect(),
            labels: members.iter().map(|m| label_map[&m.1]).collect(),
            class_count: label_map.len() as u32,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn labeled(&self) -> LabeledSet {
        LabeledSet { ids: self.ids.clone(), labels: self.labels.clone(), class_count: self.class_count }
    }

    pub fn partition_set(&self) -> BTreeSet<u32> {
        self.partitions.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPair {
    pub kind: SplitKind,
    pub alpha: Proportion,
    /// `m` for dataset splits, `K` for task splits.
    pub size_param: usize,
    pub seed: u64,
    pub d1: SplitSide,
    pub d2: SplitSide,
    /// Partitions no side trains on (task splits only).
    pub ood_partition_ids: Vec<u32>,
}

impl SplitPair {
    pub fn swapped(&self) -> SplitPair {
        let mut s = self.clone();
        std::mem::swap(&mut s.d1, &mut s.d2);
        s
    }

    pub fn shared_ids(&self) -> Vec<usize> {
        let b: BTreeSet<usize> = self.d2.ids.iter().copied().collect();
        self.d1.ids.iter().copied().filter(|id| b.contains(id)).collect()
    }

    pub fn shared_partitions(&self) -> Vec<u32> {
        self.d1.partition_set().intersection(&self.d2.partition_set()).copied().collect()
    }

    /// Partitions that appear on exactly one side.
    pub fn one_sided_partitions(&self) -> Vec<u32> {
        self.d1.partition_set().symmetric_difference(&self.d2.partition_set()).copied().collect()
    }
}

/// Shares exactly `alpha * m` examples of every partition between the two
/// sides, and gives each side `(1 - alpha) * m` further examples of the
/// partition that the other side never sees.
pub fn dataset_split(pd: &PartitionedDataset, spec: &DatasetSplitSpec) -> Result<SplitPair, SplitError> {
    if pd.partition_count() == 0 {
        return Err(SplitError::InvalidPartition("no partitions".into()));
    }
    let m = spec.per_partition.unwrap_or(pd.min_partition_size() / 2);
    if m == 0 {
        return Err(SplitError::PartitionTooSmall { partition: None, size: pd.min_partition_size(), needed: 2 });
    }
    let shared = spec
        .alpha
        .times(m)
        .ok_or(SplitError::NonIntegral { alpha: spec.alpha, count: m })?;
    let unique = m - shared;
    let needed = shared + 2 * unique;

    let label_map: BTreeMap<u32, u32> = pd.partitions().keys().enumerate().map(|(i, &p)| (p, i as u32)).collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (&p, ids) in pd.partitions() {
        if ids.len() < needed {
            return Err(SplitError::PartitionTooSmall { partition: Some(p), size: ids.len(), needed });
        }
        let mut pool = ids.clone();
        pool.shuffle(&mut rng_from(spec.seed, &[stream::SPLIT, p as u64]));
        let (common, rest) = pool.split_at(shared);
        a.extend(common.iter().chain(&rest[..unique]).map(|&id| (id, p)));
        b.extend(common.iter().chain(&rest[unique..2 * unique]).map(|&id| (id, p)));
    }
    Ok(SplitPair {
        kind: SplitKind::Dataset,
        alpha: spec.alpha,
        size_param: m,
        seed: spec.seed,
        d1: SplitSide::build(a, &label_map),
        d2: SplitSide::build(b, &label_map),
        ood_partition_ids: Vec::new(),
    })
}

/// Gives each side `K` whole partitions, `alpha * K` of them shared. The
/// partitions neither side receives are returned as out-of-distribution.
pub fn task_split_partitions(pd: &PartitionedDataset, spec: &TaskSplitSpec) -> Result<SplitPair, SplitError> {
    let n = pd.partition_count();
    let k = spec.partitions_per_side.unwrap_or(n / 2);
    if k == 0 {
        return Err(SplitError::TooFewPartitions { needed: 2, available: n });
    }
    let shared = spec
        .alpha
        .times(k)
        .ok_or(SplitError::NonIntegral { alpha: spec.alpha, count: k })?;
    let needed = 2 * k - shared;
    if needed > n {
        return Err(SplitError::TooFewPartitions { needed, available: n });
    }
    let sizes: BTreeSet<usize> = pd.partitions().values().map(Vec::len).collect();
    if sizes.len() > 1 {
        return Err(SplitError::Unbalanced);
    }

    let mut order: Vec<u32> = pd.partitions().keys().copied().collect();
    order.shuffle(&mut rng_from(spec.seed, &[stream::SPLIT]));
    let unique = k - shared;
    let common = &order[..shared];
    let only1 = &order[shared..shared + unique];
    let only2 = &order[shared + unique..shared + 2 * unique];
    let mut ood = order[needed..].to_vec();
    ood.sort_unstable();

    let side = |parts: Vec<u32>| {
        let label_map: BTreeMap<u32, u32> = {
            let mut sorted = parts.clone();
            sorted.sort_unstable();
            sorted.into_iter().enumerate().map(|(i, p)| (p, i as u32)).collect()
        };
        let members = parts
            .iter()
            .flat_map(|p| pd.partitions()[p].iter().map(move |&id| (id, *p)))
            .collect();
        SplitSide::build(members, &label_map)
    };
    Ok(SplitPair {
        kind: SplitKind::TaskPartition,
        alpha: spec.alpha,
        size_param: k,
        seed: spec.seed,
        d1: side(common.iter().chain(only1).copied().collect()),
        d2: side(common.iter().chain(only2).copied().collect()),
        ood_partition_ids: ood,
    })
}
