use std::collections::BTreeMap;

use super::AnalysisError;

/// Quantile bin of each value: `floor(#{v' < v} * bins / n)`. Equal values
/// share a bin, and the assignment depends only on ranks.
pub fn quantile_bins(ys: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = ys.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = ys.len();
    ys.iter()
        .map(|y| {
            let below = sorted.partition_point(|v| v.total_cmp(y).is_lt());
            below * bins / n
        })
        .collect()
}

/// Plug-in mutual information in bits between discrete levels `xs` and
/// quantile-binned `ys`.
pub fn mutual_information<X: Ord>(xs: &[X], ys: &[f64], y_bins: usize) -> Result<f64, AnalysisError> {
    if xs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch { xs: xs.len(), ys: ys.len() });
    }
    if y_bins < 2 {
        return Err(AnalysisError::TooFewBins(y_bins));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let bins = quantile_bins(ys, y_bins);
    let mut joint: BTreeMap<(&X, usize), usize> = BTreeMap::new();
    let mut px: BTreeMap<&X, usize> = BTreeMap::new();
    let mut py: BTreeMap<usize, usize> = BTreeMap::new();
    for (x, &b) in xs.iter().zip(&bins) {
        *joint.entry((x, b)).or_default() += 1;
        *px.entry(x).or_default() += 1;
        *py.entry(b).or_default() += 1;
    }
    if px.len() < 2 {
        return Err(AnalysisError::TooFewLevels);
    }
    let n = xs.len() as f64;
    let mi: f64 = joint
        .iter()
        .map(|(&(x, b), &c)| {
            let pxy = c as f64 / n;
            pxy * (pxy * n * n / (px[x] as f64 * py[&b] as f64)).log2()
        })
        .sum();
    Ok(mi.max(0.0))
}

/// Each architecture contributes equally: the plain mean of its MI values.
pub fn weighted_mean_mi<K>(per_architecture: &BTreeMap<K, f64>) -> Result<f64, AnalysisError> {
    if per_architecture.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(per_architecture.values().sum::<f64>() / per_architecture.len() as f64)
}
