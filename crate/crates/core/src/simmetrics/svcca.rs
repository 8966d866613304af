use super::cka::{centered_nondegenerate, check_pair};
use super::matrix::Matrix;
use super::svd::svd;
use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct SvccaResult {
    /// Mean canonical correlation.
    pub score: f64,
    pub rank_x: usize,
    pub rank_y: usize,
    /// Number of canonical correlations averaged.
    pub rank: usize,
    pub correlations: Vec<f64>,
}

/// Orthonormal basis of the leading singular directions of centered `m`
/// covering `threshold` of its variance, truncated to numeric rank.
fn reduced_basis(m: &Matrix, threshold: f64, name: &str) -> Result<Matrix, SimError> {
    let c = centered_nondegenerate(m, name)?;
    let d = svd(&c)?;
    let numeric_rank = d.s.iter().filter(|&&s| s > d.s[0] * 1e-10).count();
    let total: f64 = d.s[..numeric_rank].iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    let mut r = numeric_rank;
    for (i, s) in d.s[..numeric_rank].iter().enumerate() {
        acc += s * s;
        if acc / total >= threshold - 1e-12 {
            r = i + 1;
            break;
        }
    }
    let mut basis = Matrix::zeros(c.rows(), r);
    for i in 0..c.rows() {
        for j in 0..r {
            basis[(i, j)] = d.u[(i, j)];
        }
    }
    Ok(basis)
}

pub fn svcca_detailed(x: &Matrix, y: &Matrix, threshold: f64) -> Result<SvccaResult, SimError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(SimError::InvalidThreshold(threshold));
    }
    check_pair(x, y, 2)?;
    let bx = reduced_basis(x, threshold, "X")?;
    let by = reduced_basis(y, threshold, "Y")?;
    let rank = bx.cols().min(by.cols()).min(x.rows() - 1);
    let cross = bx.transpose().matmul(&by)?;
    let correlations: Vec<f64> = svd(&cross)?.s.into_iter().take(rank).map(|c| c.min(1.0)).collect();
    let score = correlations.iter().sum::<f64>() / rank as f64;
    Ok(SvccaResult { score, rank_x: bx.cols(), rank_y: by.cols(), rank, correlations })
}

pub fn svcca(x: &Matrix, y: &Matrix, threshold: f64) -> Result<f64, SimError> {
    svcca_detailed(x, y, threshold).map(|r| r.score)
}
