use super::aggregate::{summarize, GroupStats};
use super::AnalysisError;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub x: f64,
    pub stats: GroupStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendSummary {
    pub slope: f64,
    pub intercept: f64,
    /// `1 - SSres / SStot`, defined as 0 when `y` has no variance.
    pub r2: f64,
    /// Per distinct `x`, ascending.
    pub levels: Vec<LevelStats>,
}

/// Ordinary least squares on `(x, y)` points.
pub fn linear_regression(points: &[(f64, f64)]) -> Result<TrendSummary, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::ConstantX);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum();
    let r2 = if syy == 0.0 { 0.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };

    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let levels = xs
        .into_iter()
        .map(|x| {
            let ys: Vec<f64> = points.iter().filter(|p| p.0 == x).map(|p| p.1).collect();
            LevelStats { x, stats: summarize(&ys) }
        })
        .collect();
    Ok(TrendSummary { slope, intercept, r2, levels })
}

/// Fits the per-level means rather than the raw points, so every level
/// weighs the same regardless of how many seeds it holds. `levels` still
/// reports the raw spread.
pub fn mean_trend(points: &[(f64, f64)]) -> Result<TrendSummary, AnalysisError> {
    let raw = linear_regression(points)?;
    let means: Vec<(f64, f64)> = raw.levels.iter().map(|l| (l.x, l.stats.mean)).collect();
    let fit = linear_regression(&means)?;
    Ok(TrendSummary { levels: raw.levels, ..fit })
}
