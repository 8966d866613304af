use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;

use super::proportion::Proportion;
use super::split::{SplitKind, SplitPair};

/// Overlap recomputed from the id sets of a pair. Mismatches with the
/// pair's declared alpha are listed rather than raised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapReport {
    pub expected: Proportion,
    /// `|D1 ∩ D2| / |D1|`.
    pub data_point_overlap: Option<Ratio<u64>>,
    /// `|P1 ∩ P2| / |P1|` over the partitions each side draws from.
    pub partition_overlap: Option<Ratio<u64>>,
    /// Per-partition data-point overlap (dataset splits).
    pub per_partition: BTreeMap<u32, Ratio<u64>>,
    pub equal_size: bool,
    /// No partition feeds both the D1-only and the D2-only examples.
    pub partition_purity: bool,
    pub mismatches: Vec<String>,
}

impl OverlapReport {
    pub fn matches(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn ratio(num: usize, den: usize) -> Option<Ratio<u64>> {
    (den > 0).then(|| Ratio::new(num as u64, den as u64))
}

pub fn verify_overlap(pair: &SplitPair) -> OverlapReport {
    let expected = pair.alpha.ratio();
    let set1: BTreeSet<usize> = pair.d1.ids.iter().copied().collect();
    let set2: BTreeSet<usize> = pair.d2.ids.iter().copied().collect();
    let shared: BTreeSet<usize> = set1.intersection(&set2).copied().collect();
    let mut mismatches = Vec::new();

    if set1.len() != pair.d1.ids.len() || set2.len() != pair.d2.ids.len() {
        mismatches.push("duplicate ids within a side".to_string());
    }
    let equal_size = pair.d1.len() == pair.d2.len();
    if !equal_size {
        mismatches.push(format!("|D1| = {} but |D2| = {}", pair.d1.len(), pair.d2.len()));
    }

    let data_point_overlap = ratio(shared.len(), set1.len());
    let p1 = pair.d1.partition_set();
    let p2 = pair.d2.partition_set();
    let partition_overlap = ratio(p1.intersection(&p2).count(), p1.len());

    let part_of: BTreeMap<usize, u32> = pair
        .d1
        .ids
        .iter()
        .zip(&pair.d1.partitions)
        .chain(pair.d2.ids.iter().zip(&pair.d2.partitions))
        .map(|(&i, &p)| (i, p))
        .collect();
    let only1: BTreeSet<u32> = set1.difference(&set2).map(|i| part_of[i]).collect();
    let only2: BTreeSet<u32> = set2.difference(&set1).map(|i| part_of[i]).collect();

    let mut per_partition = BTreeMap::new();
    let partition_purity;
    match pair.kind {
        SplitKind::Dataset => {
            partition_purity = true;
            let mut count1: BTreeMap<u32, usize> = BTreeMap::new();
            let mut count2: BTreeMap<u32, usize> = BTreeMap::new();
            let mut common: BTreeMap<u32, usize> = BTreeMap::new();
            for (id, p) in pair.d1.ids.iter().zip(&pair.d1.partitions) {
                *count1.entry(*p).or_default() += 1;
                if shared.contains(id) {
                    *common.entry(*p).or_default() += 1;
                }
            }
            for p in &pair.d2.partitions {
                *count2.entry(*p).or_default() += 1;
            }
            if p1 != p2 {
                mismatches.push("sides draw from different partitions".to_string());
            }
            for (&p, &n) in &count1 {
                if count2.get(&p) != Some(&n) {
                    mismatches.push(format!("partition {p}: {n} examples in D1, {:?} in D2", count2.get(&p)));
                }
                let r = Ratio::new(common.get(&p).copied().unwrap_or(0) as u64, n as u64);
                if r != expected {
                    mismatches.push(format!("partition {p}: overlap {r} != {expected}"));
                }
                per_partition.insert(p, r);
            }
            if data_point_overlap != Some(expected) {
                mismatches.push(format!("data-point overlap {data_point_overlap:?} != {expected}"));
            }
        }
        SplitKind::TaskPartition => {
            partition_purity = only1.is_disjoint(&only2);
            if !partition_purity {
                mismatches.push("a partition feeds both unique sides".to_string());
            }
            if partition_overlap != Some(expected) {
                mismatches.push(format!("partition overlap {partition_overlap:?} != {expected}"));
            }
            if p1.len() != pair.size_param || p2.len() != pair.size_param {
                mismatches.push(format!("sides hold {} and {} partitions, K = {}", p1.len(), p2.len(), pair.size_param));
            }
            let ood: BTreeSet<u32> = pair.ood_partition_ids.iter().copied().collect();
            if !ood.is_disjoint(&p1) || !ood.is_disjoint(&p2) {
                mismatches.push("an OOD partition is used for training".to_string());
            }
        }
    }

    OverlapReport {
        expected: pair.alpha,
        data_point_overlap,
        partition_overlap,
        per_partition,
        equal_size,
        partition_purity,
        mismatches,
    }
}
