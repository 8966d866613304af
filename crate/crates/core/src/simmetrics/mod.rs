//! Representational similarity between two representation matrices over the
//! same probe rows: linear CKA, mutual kNN, kNN Jaccard, and SVCCA, with a
//! small dense linear-algebra core.

mod cka;
mod knn;
mod matrix;
mod svcca;
mod svd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cka::linear_cka;
pub use knn::{knn_jaccard, knn_sets, mutual_knn};
pub use matrix::{gram, KernelMatrix, Matrix, RepresentationMatrix};
pub use svcca::{svcca, svcca_detailed, SvccaResult};
pub use svd::{svd, Svd};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("{rows} rows given, at least {needed} needed")]
    TooFewRows { rows: usize, needed: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("k = {k} out of range for {rows} rows")]
    InvalidK { k: usize, rows: usize },
    #[error("variance threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("SVD did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cka,
    MutualKnn,
    KnnJaccard,
    Svcca,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Cka, Metric::MutualKnn, Metric::KnnJaccard, Metric::Svcca];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cka => "cka",
            Metric::MutualKnn => "mutual_knn",
            Metric::KnnJaccard => "knn_jaccard",
            Metric::Svcca => "svcca",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    /// Neighbor count for kNN metrics; clipped to `n - 1`.
    pub k: usize,
    pub svcca_threshold: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { k: 10, svcca_threshold: 0.99 }
    }
}

impl MetricConfig {
    pub fn effective_k(&self, rows: usize) -> usize {
        self.k.min(rows.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore {
    pub metric: Metric,
    pub value: f64,
}

pub fn similarity(metric: Metric, x: &Matrix, y: &Matrix, cfg: &MetricConfig) -> Result<SimilarityScore, SimError> {
    let value = match metric {
        Metric::Cka => linear_cka(x, y)?,
        Metric::MutualKnn => mutual_knn(x, y, cfg.effective_k(x.rows()))?,
        Metric::KnnJaccard => knn_jaccard(x, y, cfg.effective_k(x.rows()))?,
        Metric::Svcca => svcca(x, y, cfg.svcca_threshold)?,
    };
    Ok(SimilarityScore { metric, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("rbf_cka".parse::<Metric>().is_err());
    }

    #[test]
    fn k_is_clipped() {
        let cfg = MetricConfig::default();
        assert_eq!(cfg.effective_k(5), 4);
        assert_eq!(cfg.effective_k(50), 10);
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(similarity(Metric::MutualKnn, &x, &x, &cfg).unwrap().value, 1.0);
    }
}
