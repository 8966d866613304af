use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::svg::{trend_plot, Series};
use super::{io_err, RunnerError};
use crate::analysis::{
    format_value, load_records, mean_trend, mutual_information, weighted_mean_mi, AnalysisError, ExperimentRecord,
    SplitType,
};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const MI_FILE: &str = "mi.csv";

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub mi_bins: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { mi_bins: 4 }
    }
}

/// Trend and MI for one (experiment, split type, probe set, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub split_type: SplitType,
    pub probe_set: String,
    pub metric: String,
    pub levels: usize,
    pub values: usize,
    /// Fit of level means against overlap; absent with a single level.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    /// Bits shared between the overlap level and the binned score.
    pub mi: Option<f64>,
}

/// MI averaged over experiments, one row per (split type, probe, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct MiRow {
    pub split_type: SplitType,
    pub probe_set: String,
    pub metric: String,
    pub mi: f64,
    pub experiments: usize,
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub plots: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub mi_path: PathBuf,
    pub summary: Vec<SummaryRow>,
    pub mi: Vec<MiRow>,
}

impl ReportOutcome {
    pub fn find(&self, split_type: SplitType, probe_set: &str, metric: &str) -> impl Iterator<Item = &SummaryRow> {
        let (p, m) = (probe_set.to_string(), metric.to_string());
        self.summary
            .iter()
            .filter(move |r| r.split_type == split_type && r.probe_set == p && r.metric == m)
    }

    pub fn mi_for(&self, split_type: SplitType, probe_set: &str, metric: &str) -> Option<f64> {
        self.mi
            .iter()
            .find(|r| r.split_type == split_type && r.probe_set == probe_set && r.metric == metric)
            .map(|r| r.mi)
    }
}

type GroupKey = (String, SplitType, String, String);

fn overlap_x(r: &ExperimentRecord) -> Result<f64, RunnerError> {
    r.overlap_x().ok_or_else(|| {
        AnalysisError::Format(format!("overlap `{}` is not valid for split type {}", r.overlap, r.split_type)).into()
    })
}

/// Summarizes one records file: a plot per (experiment, split type, metric)
/// with a series per probe set, `summary.csv` and `mi.csv`, all in `out_dir`.
pub fn report(records_path: &Path, out_dir: &Path, options: ReportOptions) -> Result<ReportOutcome, RunnerError> {
    let records = load_records(records_path)?;
    if records.is_empty() {
        return Err(AnalysisError::Empty.into());
    }
    summarize_records(&records, out_dir, options)
}

pub(crate) fn summarize_records(
    records: &[ExperimentRecord],
    out_dir: &Path,
    options: ReportOptions,
) -> Result<ReportOutcome, RunnerError> {
    if options.mi_bins < 2 {
        return Err(AnalysisError::TooFewBins(options.mi_bins).into());
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut groups: BTreeMap<GroupKey, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.experiment_id.clone(), r.split_type, r.probe_set.clone(), r.metric.clone()))
            .or_default()
            .push(r);
    }

    let mut summary = Vec::new();
    let mut plot_series: BTreeMap<(String, SplitType, String), Vec<Series>> = BTreeMap::new();
    for ((exp, split, probe, metric), rs) in &groups {
        let points: Vec<(f64, f64)> = rs.iter().map(|r| Ok((overlap_x(r)?, r.value))).collect::<Result<_, RunnerError>>()?;
        let trend = match mean_trend(&points) {
            Ok(t) => Some(t),
            Err(AnalysisError::ConstantX) => None,
            Err(e) => return Err(e.into()),
        };
        let levels: Vec<&str> = rs.iter().map(|r| r.overlap.as_str()).collect();
        let values: Vec<f64> = rs.iter().map(|r| r.value).collect();
        let mi = match mutual_information(&levels, &values, options.mi_bins) {
            Ok(v) => Some(v),
            Err(AnalysisError::TooFewLevels) => None,
            Err(e) => return Err(e.into()),
        };
        let distinct = levels.iter().collect::<std::collections::BTreeSet<_>>().len();
        summary.push(SummaryRow {
            experiment_id: exp.clone(),
            split_type: *split,
            probe_set: probe.clone(),
            metric: metric.clone(),
            levels: distinct,
            values: rs.len(),
            slope: trend.as_ref().map(|t| t.slope),
            intercept: trend.as_ref().map(|t| t.intercept),
            r2: trend.as_ref().map(|t| t.r2),
            mi,
        });
        let per_level = match &trend {
            Some(t) => t.levels.iter().map(|l| (l.x, l.stats.mean, l.stats.std)).collect(),
            None => {
                let s = crate::analysis::summarize(&values);
                vec![(points[0].0, s.mean, s.std)]
            }
        };
        plot_series.entry((exp.clone(), *split, metric.clone())).or_default().push(Series {
            name: probe.clone(),
            points: per_level,
            fit: trend.as_ref().map(|t| (t.slope, t.intercept)),
        });
    }

    let mut plots = Vec::new();
    for ((exp, split, metric), series) in &plot_series {
        let path = out_dir.join(format!("{exp}_{split}_{metric}.svg"));
        let x_label = match split {
            SplitType::TaskRelabel => "task overlap (level 1 = 0, 2x = 0.5, 3 = 1)",
            _ => "overlap proportion",
        };
        let svg = trend_plot(&format!("{exp}: {metric} vs {split} overlap"), x_label, metric, series);
        std::fs::write(&path, svg).map_err(io_err(&path))?;
        plots.push(path);
    }

    let mut by_setting: BTreeMap<(SplitType, String, String), BTreeMap<String, f64>> = BTreeMap::new();
    for row in &summary {
        if let Some(mi) = row.mi {
            by_setting
                .entry((row.split_type, row.probe_set.clone(), row.metric.clone()))
                .or_default()
                .insert(row.experiment_id.clone(), mi);
        }
    }
    let mi = by_setting
        .into_iter()
        .map(|((split_type, probe_set, metric), per_exp)| {
            Ok(MiRow { split_type, probe_set, metric, mi: weighted_mean_mi(&per_exp)?, experiments: per_exp.len() })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;

    let summary_path = out_dir.join(SUMMARY_FILE);
    let opt = |v: Option<f64>| v.map(format_value).unwrap_or_default();
    write_csv(
        &summary_path,
        &["experiment_id", "split_type", "probe_set", "metric", "levels", "values", "slope", "intercept", "r2", "mi_bits"],
        summary.iter().map(|r| {
            vec![
                r.experiment_id.clone(),
                r.split_type.to_string(),
                r.probe_set.clone(),
                r.metric.clone(),
                r.levels.to_string(),
                r.values.to_string(),
                opt(r.slope),
                opt(r.intercept),
                opt(r.r2),
                opt(r.mi),
            ]
        }),
    )?;
    let mi_path = out_dir.join(MI_FILE);
    write_csv(
        &mi_path,
        &["split_type", "probe_set", "metric", "mean_mi_bits", "experiments"],
        mi.iter().map(|r| {
            vec![r.split_type.to_string(), r.probe_set.clone(), r.metric.clone(), format_value(r.mi), r.experiments.to_string()]
        }),
    )?;
    Ok(ReportOutcome { plots, summary_path, mi_path, summary, mi })
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), RunnerError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(|e| {
        RunnerError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
    })?;
    let fail = |e: csv::Error| RunnerError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) };
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(io_err(path))
}
