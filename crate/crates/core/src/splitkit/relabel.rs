use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SplitError;
use crate::synthgen::{apply_scheme, GeneratedDataset, LabelScheme, LabeledSet};

/// Task-overlap levels over one fixed image set. Higher levels share more
/// label attributes between the two sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskLevel {
    L1,
    L2A,
    L2B,
    L2C,
    L3,
}

impl TaskLevel {
    pub const ALL: [TaskLevel; 5] = [TaskLevel::L1, TaskLevel::L2A, TaskLevel::L2B, TaskLevel::L2C, TaskLevel::L3];

    /// Label schemes of (D1, D2).
    pub fn schemes(self) -> (LabelScheme, LabelScheme) {
        match self {
            TaskLevel::L1 => (LabelScheme::S, LabelScheme::D),
            TaskLevel::L2A => (LabelScheme::SD, LabelScheme::SC),
            TaskLevel::L2B => (LabelScheme::SD, LabelScheme::DC),
            TaskLevel::L2C => (LabelScheme::SC, LabelScheme::DC),
            TaskLevel::L3 => (LabelScheme::SDC, LabelScheme::SDC),
        }
    }

    /// Numeric task overlap: level 1, 2x, 3 map to 0, 0.5, 1.
    pub fn overlap(self) -> f64 {
        match self {
            TaskLevel::L1 => 0.0,
            TaskLevel::L2A | TaskLevel::L2B | TaskLevel::L2C => 0.5,
            TaskLevel::L3 => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            TaskLevel::L1 => "1",
            TaskLevel::L2A => "2A",
            TaskLevel::L2B => "2B",
            TaskLevel::L2C => "2C",
            TaskLevel::L3 => "3",
        }
    }
}

impl fmt::Display for TaskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TaskLevel {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskLevel::ALL
            .into_iter()
            .find(|l| l.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SplitError::InvalidLevel(s.to_string()))
    }
}

impl Serialize for TaskLevel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for TaskLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        let s = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Int(i) => i.to_string(),
        };
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Both sides hold every example of `dataset`; only the labels differ.
pub fn task_overlap_pair(dataset: &GeneratedDataset, level: TaskLevel) -> (LabeledSet, LabeledSet) {
    let (a, b) = level.schemes();
    (apply_scheme(dataset, a), apply_scheme(dataset, b))
}
