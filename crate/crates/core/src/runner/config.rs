use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::analysis::SplitType;
use crate::simmetrics::{Metric, MetricConfig};
use crate::splitkit::{Proportion, TaskLevel};
use crate::synthgen::{DatasetSpec, ImageSize, LabelScheme};
use crate::tinynet::{ConvArch, ModelArch, TrainConfig, DEFAULT_DECODER_HIDDEN, DEFAULT_LATENT};

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "REPSIM_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Classifier,
    Vae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OodProbe {
    HeldOutColors,
    HeldOutShapes,
    Noise,
}

impl OodProbe {
    pub const ALL: [OodProbe; 3] = [OodProbe::HeldOutColors, OodProbe::HeldOutShapes, OodProbe::Noise];

    pub fn probe_name(self) -> &'static str {
        match self {
            OodProbe::HeldOutColors => "ood_colors",
            OodProbe::HeldOutShapes => "ood_shapes",
            OodProbe::Noise => "ood_noise",
        }
    }
}

pub const IN_DISTRIBUTION: &str = "in_distribution";
pub const EXCLUDED_PARTITIONS: &str = "excluded_partitions";

/// One sweep over overlap levels and seeds. Every key is optional in the
/// file except `split_type`; see `configs/example.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// First column of every record; names the model family.
    #[serde(default = "default_experiment")]
    pub experiment: String,
    pub split_type: SplitType,
    /// α values (`0.25`, `1/3`) for dataset and task-partition splits, task
    /// levels (`1`, `2A`, ..., `3`) for relabel splits.
    #[serde(default)]
    pub levels: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,

    #[serde(default)]
    pub data_seed: u64,
    #[serde(default = "default_count")]
    pub per_combination_count: usize,
    #[serde(default = "default_image_size")]
    pub image_size: u32,
    /// Label scheme whose classes are the partitions of dataset and
    /// task-partition splits. Ignored for relabel splits.
    #[serde(default = "default_scheme")]
    pub scheme: LabelScheme,
    /// `m`: examples per partition per side (dataset split).
    #[serde(default)]
    pub per_partition: Option<usize>,
    /// `K`: partitions per side (task-partition split).
    #[serde(default)]
    pub partitions_per_side: Option<usize>,

    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default = "default_conv1")]
    pub conv1: u32,
    #[serde(default = "default_conv2")]
    pub conv2: u32,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: u32,
    #[serde(default = "default_latent")]
    pub latent: u32,

    /// Both models of a pair start from the same initialization (drawn from
    /// the run seed); shuffling always uses a separate stream per model.
    #[serde(default = "default_true")]
    pub shared_init: bool,

    #[serde(default)]
    pub lr: Option<f64>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub momentum: Option<f64>,
    #[serde(default)]
    pub weight_decay: Option<f64>,
    #[serde(default)]
    pub label_smoothing: Option<f64>,
    #[serde(default)]
    pub peak_epoch: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,

    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    #[serde(default = "default_threshold")]
    pub svcca_threshold: f64,

    /// Images per probe set.
    #[serde(default = "default_probe_size")]
    pub probe_size: usize,
    /// Per-combination count of the held-out test pool the in-distribution
    /// and excluded-partition probes are drawn from.
    #[serde(default = "default_test_count")]
    pub test_per_combination: usize,
    #[serde(default = "default_ood")]
    pub ood_probes: Vec<OodProbe>,

    #[serde(default = "default_bins")]
    pub mi_bins: usize,
    /// Output directory; falls back to `$REPSIM_OUT/<experiment>-<split_type>`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_experiment() -> String {
    "cnn".into()
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_count() -> usize {
    20
}
fn default_image_size() -> u32 {
    32
}
fn default_scheme() -> LabelScheme {
    LabelScheme::SD
}
fn default_model() -> ModelKind {
    ModelKind::Classifier
}
fn default_conv1() -> u32 {
    16
}
fn default_conv2() -> u32 {
    32
}
fn default_feature_dim() -> u32 {
    64
}
fn default_latent() -> u32 {
    DEFAULT_LATENT
}
fn default_true() -> bool {
    true
}
fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}
fn default_k() -> usize {
    MetricConfig::default().k
}
fn default_threshold() -> f64 {
    MetricConfig::default().svcca_threshold
}
fn default_probe_size() -> usize {
    500
}
fn default_test_count() -> usize {
    1
}
fn default_ood() -> Vec<OodProbe> {
    OodProbe::ALL.to_vec()
}
fn default_bins() -> usize {
    4
}

pub const DEFAULT_ALPHAS: [&str; 5] = ["0", "0.25", "0.5", "0.75", "1"];

/// A validated overlap level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Alpha(Proportion),
    Task(TaskLevel),
}

impl Level {
    /// The string written to the `overlap` column.
    pub fn label(&self) -> String {
        match self {
            Level::Alpha(a) => a.to_string(),
            Level::Task(t) => t.tag().to_string(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(split_type: SplitType) -> Self {
        toml::from_str(&format!("split_type = \"{split_type}\"")).expect("defaults deserialize")
    }

    pub fn parse(text: &str) -> Result<Self, RunnerError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            RunnerError::Config(m) => RunnerError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Levels in sweep order, falling back to the default grid.
    pub fn resolved_levels(&self) -> Result<Vec<Level>, RunnerError> {
        let raw: Vec<String> = if self.levels.is_empty() {
            match self.split_type {
                SplitType::TaskRelabel => TaskLevel::ALL.iter().map(|l| l.tag().to_string()).collect(),
                _ => DEFAULT_ALPHAS.iter().map(|s| s.to_string()).collect(),
            }
        } else {
            self.levels.clone()
        };
        let mut seen = BTreeSet::new();
        raw.iter()
            .map(|s| {
                let level = match self.split_type {
                    SplitType::TaskRelabel => Level::Task(
                        s.parse().map_err(|_| RunnerError::Config(format!("unknown task level `{s}`")))?,
                    ),
                    _ => Level::Alpha(
                        s.parse().map_err(|e| RunnerError::Config(format!("overlap level `{s}`: {e}")))?,
                    ),
                };
                if !seen.insert(level.label()) {
                    return Err(RunnerError::Config(format!("overlap level `{s}` listed twice")));
                }
                Ok(level)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: &str| Err(RunnerError::Config(m.to_string()));
        if self.experiment.is_empty() || self.experiment.contains([',', '"', '\n', '/']) {
            return bad("experiment must be a non-empty name without commas, quotes or slashes");
        }
        self.resolved_levels()?;
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.model == ModelKind::Vae && self.split_type == SplitType::TaskRelabel {
            return bad("relabel splits differ only in labels, which a VAE never sees");
        }
        if self.metrics.is_empty() {
            return bad("metrics must not be empty");
        }
        if self.probe_size < 3 {
            return bad("probe_size must be at least 3");
        }
        if self.mi_bins < 2 {
            return bad("mi_bins must be at least 2");
        }
        if self.knn_k == 0 {
            return bad("knn_k must be positive");
        }
        if !(self.svcca_threshold > 0.0 && self.svcca_threshold <= 1.0) {
            return bad("svcca_threshold must lie in (0, 1]");
        }
        self.dataset_spec().validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        DatasetSpec::new(self.test_per_combination)
            .validate()
            .map_err(|e| RunnerError::Config(format!("test_per_combination: {e}")))?;
        self.model_arch(2).validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        self.train_config(0).validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn image_size(&self) -> ImageSize {
        ImageSize::square(self.image_size)
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec::new(self.per_combination_count).with_image_size(self.image_size())
    }

    pub fn backbone(&self) -> ConvArch {
        ConvArch::new(self.image_size())
            .with_channels(self.conv1, self.conv2)
            .with_feature_dim(self.feature_dim)
    }

    /// Architecture for a classifier with `classes` outputs, or the VAE.
    pub fn model_arch(&self, classes: u32) -> ModelArch {
        match self.model {
            ModelKind::Classifier => ModelArch::Classifier { backbone: self.backbone(), classes },
            ModelKind::Vae => ModelArch::Vae { backbone: self.backbone(), latent: self.latent, hidden: DEFAULT_DECODER_HIDDEN },
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let mut t = match self.model {
            ModelKind::Classifier => TrainConfig::default(),
            ModelKind::Vae => TrainConfig::vae(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut t.lr, self.lr);
        set(&mut t.momentum, self.momentum);
        set(&mut t.weight_decay, self.weight_decay);
        set(&mut t.label_smoothing, self.label_smoothing);
        set(&mut t.peak_epoch, self.peak_epoch);
        set(&mut t.beta, self.beta);
        if let Some(e) = self.epochs {
            t.epochs = e;
        }
        if let Some(b) = self.batch_size {
            t.batch_size = b;
        }
        t.seed = seed;
        t
    }

    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig { k: self.knn_k, svcca_threshold: self.svcca_threshold }
    }

    /// `out`, else `$REPSIM_OUT/<experiment>-<split_type>`, else
    /// `repsim-out/<experiment>-<split_type>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        default_output_root().join(format!("{}-{}", self.experiment, self.split_type))
    }
}

pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("repsim-out"))
}
