//! Records file: CSV with header
//! `experiment_id,split_type,overlap,seed,probe_set,metric,value`, LF line
//! endings, values at 9 significant digits, rows in canonical key order.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

pub const HEADER: [&str; 7] = ["experiment_id", "split_type", "overlap", "seed", "probe_set", "metric", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitType {
    Dataset,
    TaskPartition,
    TaskRelabel,
}

impl SplitType {
    pub const ALL: [SplitType; 3] = [SplitType::Dataset, SplitType::TaskPartition, SplitType::TaskRelabel];

    pub fn name(self) -> &'static str {
        match self {
            SplitType::Dataset => "dataset",
            SplitType::TaskPartition => "task_partition",
            SplitType::TaskRelabel => "task_relabel",
        }
    }
}

impl fmt::Display for SplitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitType {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SplitType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| AnalysisError::Format(format!("unknown split type `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub split_type: SplitType,
    /// α as a decimal or fraction, or a task level tag (`1`, `2A`, ..., `3`).
    pub overlap: String,
    pub seed: u64,
    pub probe_set: String,
    pub metric: String,
    pub value: f64,
}

/// Numeric overlap for regression: α itself, or 0 / 0.5 / 1 for task levels
/// 1 / 2x / 3.
pub fn overlap_value(split_type: SplitType, overlap: &str) -> Option<f64> {
    match split_type {
        SplitType::TaskRelabel => match overlap {
            "1" => Some(0.0),
            "2A" | "2B" | "2C" => Some(0.5),
            "3" => Some(1.0),
            _ => None,
        },
        _ => overlap.parse::<crate::splitkit::Proportion>().ok().map(|p| p.to_f64()),
    }
}

impl ExperimentRecord {
    pub fn overlap_x(&self) -> Option<f64> {
        overlap_value(self.split_type, &self.overlap)
    }

    pub fn key_cmp(&self, other: &Self) -> Ordering {
        (&self.experiment_id, self.split_type, &self.overlap, self.seed, &self.probe_set, &self.metric).cmp(&(
            &other.experiment_id,
            other.split_type,
            &other.overlap,
            other.seed,
            &other.probe_set,
            &other.metric,
        ))
    }
}

pub fn canonical_sort(records: &mut [ExperimentRecord]) {
    records.sort_by(|a, b| a.key_cmp(b).then(a.value.total_cmp(&b.value)));
}

/// `printf("%.9g")`.
pub fn format_value(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, v)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<(), AnalysisError> {
    let mut sorted = records.to_vec();
    canonical_sort(&mut sorted);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for r in &sorted {
        let seed = r.seed.to_string();
        let value = format_value(r.value);
        w.write_record([
            r.experiment_id.as_str(),
            r.split_type.name(),
            &r.overlap,
            &seed,
            &r.probe_set,
            &r.metric,
            &value,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>, AnalysisError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(HEADER) {
        return Err(AnalysisError::Format(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let bad = |what: &str| AnalysisError::Format(format!("row {}: invalid {what}", line + 2));
        let value: f64 = row[6].parse().map_err(|_| bad("value"))?;
        if !value.is_finite() {
            return Err(bad("value"));
        }
        out.push(ExperimentRecord {
            experiment_id: row[0].to_string(),
            split_type: row[1].parse().map_err(|_| bad("split_type"))?,
            overlap: row[2].to_string(),
            seed: row[3].parse().map_err(|_| bad("seed"))?,
            probe_set: row[4].to_string(),
            metric: row[5].to_string(),
            value,
        });
    }
    Ok(out)
}

pub fn save_records(path: &Path, records: &[ExperimentRecord]) -> Result<(), AnalysisError> {
    let f = std::fs::File::create(path).map_err(|e| AnalysisError::Format(format!("{}: {e}", path.display())))?;
    write_records(std::io::BufWriter::new(f), records)
}

pub fn load_records(path: &Path) -> Result<Vec<ExperimentRecord>, AnalysisError> {
    let f = std::fs::File::open(path).map_err(|e| AnalysisError::Format(format!("{}: {e}", path.display())))?;
    read_records(std::io::BufReader::new(f))
}

fn csv_err(e: csv::Error) -> AnalysisError {
    AnalysisError::Format(e.to_string())
}
