use std::collections::BTreeMap;

use super::records::ExperimentRecord;

/// Mean, population standard deviation, and count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> GroupStats {
    let count = values.len();
    if count == 0 {
        return GroupStats { mean: f64::NAN, std: f64::NAN, count };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    GroupStats { mean, std: var.sqrt(), count }
}

/// Groups records by `key` and summarizes their values; groups come back in
/// ascending key order.
pub fn aggregate<K: Ord>(records: &[ExperimentRecord], key: impl Fn(&ExperimentRecord) -> K) -> Vec<(K, GroupStats)> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(r.value);
    }
    groups.into_iter().map(|(k, v)| (k, summarize(&v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let s = summarize(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(summarize(&[4.5]).std, 0.0);
    }
}
