//! Split manifests: a TOML file recording the spec, seed, and the id lists
//! of a [`SplitPair`], enough to rebuild it against its partitioned source.
//!
//! ```toml
//! kind = "dataset"            # or "task_partition"
//! alpha = "0.25"
//! size_param = 40             # m (dataset) or K (task_partition)
//! seed = 3
//! shared_ids = [...]
//! d1_unique_ids = [...]
//! d2_unique_ids = [...]
//! d1_partitions = [...]       # partitions each side trains on
//! d2_partitions = [...]
//! ood_partition_ids = [...]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::proportion::Proportion;
use super::split::{PartitionedDataset, SplitKind, SplitPair, SplitSide};
use super::SplitError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub kind: SplitKind,
    pub alpha: Proportion,
    pub size_param: usize,
    pub seed: u64,
    pub shared_ids: Vec<usize>,
    pub d1_unique_ids: Vec<usize>,
    pub d2_unique_ids: Vec<usize>,
    pub d1_partitions: Vec<u32>,
    pub d2_partitions: Vec<u32>,
    pub ood_partition_ids: Vec<u32>,
}

impl SplitManifest {
    pub fn from_pair(pair: &SplitPair) -> Self {
        let shared: BTreeSet<usize> = pair.shared_ids().into_iter().collect();
        let unique = |side: &SplitSide| side.ids.iter().copied().filter(|i| !shared.contains(i)).collect();
        Self {
            kind: pair.kind,
            alpha: pair.alpha,
            size_param: pair.size_param,
            seed: pair.seed,
            shared_ids: shared.iter().copied().collect(),
            d1_unique_ids: unique(&pair.d1),
            d2_unique_ids: unique(&pair.d2),
            d1_partitions: pair.d1.partition_set().into_iter().collect(),
            d2_partitions: pair.d2.partition_set().into_iter().collect(),
            ood_partition_ids: pair.ood_partition_ids.clone(),
        }
    }

    /// Rebuilds the pair, relabeling from the partitions of `pd`.
    pub fn to_pair(&self, pd: &PartitionedDataset) -> Result<SplitPair, SplitError> {
        let part_of = pd.partition_of();
        let side = |unique: &[usize], parts: &[u32]| -> Result<SplitSide, SplitError> {
            let label_map: BTreeMap<u32, u32> = match self.kind {
                SplitKind::Dataset => pd.partitions().keys().enumerate().map(|(i, &p)| (p, i as u32)).collect(),
                SplitKind::TaskPartition => parts.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect(),
            };
            let mut ids: Vec<usize> = self.shared_ids.iter().chain(unique).copied().collect();
            ids.sort_unstable();
            let mut partitions = Vec::with_capacity(ids.len());
            let mut labels = Vec::with_capacity(ids.len());
            for id in &ids {
                let p = *part_of
                    .get(id)
                    .ok_or_else(|| SplitError::InvalidPartition(format!("manifest id {id} not in source")))?;
                let l = *label_map
                    .get(&p)
                    .ok_or_else(|| SplitError::InvalidPartition(format!("id {id} in undeclared partition {p}")))?;
                partitions.push(p);
                labels.push(l);
            }
            Ok(SplitSide { ids, partitions, labels, class_count: label_map.len() as u32 })
        };
        Ok(SplitPair {
            kind: self.kind,
            alpha: self.alpha,
            size_param: self.size_param,
            seed: self.seed,
            d1: side(&self.d1_unique_ids, &self.d1_partitions)?,
            d2: side(&self.d2_unique_ids, &self.d2_partitions)?,
            ood_partition_ids: self.ood_partition_ids.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SplitError> {
        let text = toml::to_string(self).map_err(|e| SplitError::Manifest(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| SplitError::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, SplitError> {
        let text = std::fs::read_to_string(path).map_err(|e| SplitError::Manifest(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| SplitError::Manifest(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::super::split::{dataset_split, task_split_partitions, DatasetSplitSpec, TaskSplitSpec};
    use super::*;

    fn uniform(n_parts: u32, size: usize) -> PartitionedDataset {
        let parts = (0..n_parts)
            .map(|p| (p, (0..size).map(|i| p as usize * size + i).collect()))
            .collect();
        PartitionedDataset::new(parts, n_parts as usize * size).unwrap()
    }

    #[test]
    fn manifests_rebuild_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let pd = uniform(6, 20);
        let pairs = [
            dataset_split(&pd, &DatasetSplitSpec { alpha: "0.3".parse().unwrap(), per_partition: Some(10), seed: 2 }).unwrap(),
            task_split_partitions(&pd, &TaskSplitSpec { alpha: "1/3".parse().unwrap(), partitions_per_side: Some(3), seed: 2 }).unwrap(),
        ];
        for (i, pair) in pairs.iter().enumerate() {
            let path = dir.path().join(format!("split{i}.toml"));
            SplitManifest::from_pair(pair).save(&path).unwrap();
            let back = SplitManifest::load(&path).unwrap().to_pair(&pd).unwrap();
            assert_eq!(&back, pair);
        }
    }

    #[test]
    fn missing_manifest_names_path() {
        let err = SplitManifest::load(Path::new("/nonexistent/split.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/split.toml"));
    }
}
