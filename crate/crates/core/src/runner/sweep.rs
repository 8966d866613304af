use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Level, ModelKind, EXCLUDED_PARTITIONS, IN_DISTRIBUTION};
use super::{io_err, RunnerError};
use crate::analysis::{canonical_sort, load_records, save_records, ExperimentRecord, SplitType};
use crate::par;
use crate::rng::{derive_seed, rng_from, stream};
use crate::simmetrics::similarity;
use crate::splitkit::{
    dataset_split, denominator_lcm, task_overlap_pair, task_split_partitions, DatasetSplitSpec, PartitionedDataset,
    Proportion, SplitManifest, SplitPair, TaskLevel, TaskSplitSpec,
};
use crate::synthgen::{apply_scheme, generate, make_ood_probe, DatasetSpec, GeneratedDataset, ImageBatch, OodKind};
use crate::tinynet::{
    extract_representations, load_checkpoint, pair_model_seed, save_checkpoint, train_classifier, train_vae,
    TrainedModel,
};

use super::config::OodProbe;

pub const RECORDS_FILE: &str = "records.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 keeps the global default.
    pub jobs: usize,
    /// Overrides the config's output directory.
    pub out: Option<PathBuf>,
    /// Print one line per finished run to stderr.
    pub progress: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The (level, seed) combination is infeasible for the dataset.
    Skipped,
    Failed,
}

/// One (level, seed) run. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run_id: String,
    pub overlap: String,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    #[serde(default)]
    pub record_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub records: PathBuf,
    pub runs: Vec<RunEntry>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<(), RunnerError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| RunnerError::Resume(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| RunnerError::Resume(format!("{}: {e}", path.display())))
    }

    pub fn with_status(&self, status: RunStatus) -> impl Iterator<Item = &RunEntry> {
        self.runs.iter().filter(move |r| r.status == status)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    /// Canonically sorted; identical to the records file.
    pub records: Vec<ExperimentRecord>,
}

impl SweepOutcome {
    pub fn records_path(&self) -> PathBuf {
        self.out_dir.join(&self.manifest.records)
    }
}

/// Runs every (level, seed) combination of `config`, skipping runs whose
/// artifacts already exist, and writes `records.csv` and `manifest.json`
/// under the output directory.
pub fn run_sweep(config: &ExperimentConfig, options: &SweepOptions) -> Result<SweepOutcome, RunnerError> {
    config.validate()?;
    let out_dir = options.out.clone().unwrap_or_else(|| config.output_dir());
    std::fs::create_dir_all(out_dir.join("runs")).map_err(io_err(&out_dir))?;
    check_resume(config, &out_dir)?;

    par::with_jobs(options.jobs, || {
        let ctx = Context::build(config)?;
        let mut plans = Vec::new();
        let mut entries = Vec::new();
        for level in config.resolved_levels()? {
            for &seed in &config.seeds {
                let run_id = format!("{}-s{seed}", level.label().replace('/', "_"));
                match ctx.plan(level, seed) {
                    Ok(pair) => plans.push((run_id, level, seed, pair)),
                    Err(e) => entries.push(RunEntry {
                        run_id,
                        overlap: level.label(),
                        seed,
                        status: RunStatus::Skipped,
                        reason: Some(e.to_string()),
                        split: None,
                        checkpoints: Vec::new(),
                        records: None,
                        record_count: 0,
                    }),
                }
            }
        }
        if options.progress {
            for e in &entries {
                eprintln!("skipped {}: {}", e.run_id, e.reason.as_deref().unwrap_or(""));
            }
        }

        let results = par::map(&plans, |(run_id, level, seed, pair)| {
            let result = ctx.execute(&out_dir, run_id, *level, *seed, pair);
            if options.progress {
                match &result {
                    Ok((_, resumed)) => {
                        eprintln!("{} {run_id}", if *resumed { "resumed" } else { "finished" })
                    }
                    Err(e) => eprintln!("failed {run_id}: {e}"),
                }
            }
            result.map(|(records, _)| records)
        });

        let mut records = Vec::new();
        let mut runs = entries;
        for ((run_id, level, seed, _), result) in plans.iter().zip(results) {
            let dir = Path::new("runs").join(run_id);
            let mut entry = RunEntry {
                run_id: run_id.clone(),
                overlap: level.label(),
                seed: *seed,
                status: RunStatus::Completed,
                reason: None,
                split: Some(dir.join(SPLIT_FILE)),
                checkpoints: vec![dir.join(CHECKPOINT_A), dir.join(CHECKPOINT_B)],
                records: Some(dir.join(RECORDS_FILE)),
                record_count: 0,
            };
            match result {
                Ok(rs) => {
                    entry.record_count = rs.len();
                    records.extend(rs);
                }
                Err(e) => {
                    entry.status = RunStatus::Failed;
                    entry.reason = Some(e.to_string());
                    entry.checkpoints.clear();
                    entry.records = None;
                }
            }
            runs.push(entry);
        }
        let levels: Vec<String> = config.resolved_levels()?.iter().map(Level::label).collect();
        runs.sort_by_key(|r| (levels.iter().position(|l| *l == r.overlap), r.seed));

        canonical_sort(&mut records);
        save_records(&out_dir.join(RECORDS_FILE), &records)?;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            records: PathBuf::from(RECORDS_FILE),
            runs,
        };
        manifest.save(&out_dir.join(MANIFEST_FILE))?;
        Ok(SweepOutcome { out_dir: out_dir.clone(), manifest, records })
    })
}

const SPLIT_FILE: &str = "split.toml";
const CHECKPOINT_A: &str = "model_a.rsck";
const CHECKPOINT_B: &str = "model_b.rsck";

/// A config snapshot guards resumption: an output directory is only reused
/// by the config that created it.
fn check_resume(config: &ExperimentConfig, out_dir: &Path) -> Result<(), RunnerError> {
    let path = out_dir.join(CONFIG_FILE);
    let mut snapshot = config.clone();
    snapshot.out = None;
    if path.exists() {
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let previous: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| RunnerError::Resume(format!("{}: {e}", path.display())))?;
        if previous != snapshot {
            return Err(RunnerError::Resume(format!(
                "{} holds results of a different config; choose another output directory",
                out_dir.display()
            )));
        }
        return Ok(());
    }
    write_atomic(&path, snapshot.to_toml().as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunnerError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Training data for one side of a pair.
struct Side {
    ids: Vec<usize>,
    labels: Vec<u32>,
}

enum Plan {
    Split(SplitPair),
    Relabel(TaskLevel, Side, Side),
}

#[derive(Serialize, Deserialize)]
struct RelabelSplit {
    split_type: SplitType,
    level: TaskLevel,
}

struct Probe {
    name: &'static str,
    images: ImageBatch,
}

/// Everything shared by all runs of a sweep.
struct Context<'a> {
    config: &'a ExperimentConfig,
    train: GeneratedDataset,
    partitions: Option<PartitionedDataset>,
    /// `m` or `K`: the configured value, else the default rounded down to a
    /// multiple of the levels' common denominator so every level is exact.
    size_param: Option<usize>,
    /// Test-pool ids and their partition under the config's scheme.
    test: GeneratedDataset,
    test_partitions: Vec<u32>,
    ood: Vec<Probe>,
}

impl<'a> Context<'a> {
    fn build(config: &'a ExperimentConfig) -> Result<Self, RunnerError> {
        let train = generate(&config.dataset_spec(), config.data_seed)?;
        let test_spec = DatasetSpec::new(config.test_per_combination).with_image_size(config.image_size());
        let test = generate(&test_spec, derive_seed(config.data_seed, &[stream::TEST_POOL]))?;
        let partitions = match config.split_type {
            SplitType::TaskRelabel => None,
            _ => Some(PartitionedDataset::from_labels(&apply_scheme(&train, config.scheme), train.len())?),
        };
        let test_partitions = apply_scheme(&test, config.scheme).labels;
        let alphas: Vec<Proportion> = config
            .resolved_levels()?
            .into_iter()
            .filter_map(|l| match l {
                Level::Alpha(a) => Some(a),
                Level::Task(_) => None,
            })
            .collect();
        let step = denominator_lcm(&alphas) as usize;
        let size_param = match (&partitions, config.split_type) {
            (Some(_), SplitType::Dataset) if config.per_partition.is_some() => config.per_partition,
            (Some(_), SplitType::TaskPartition) if config.partitions_per_side.is_some() => config.partitions_per_side,
            (Some(pd), SplitType::Dataset) => Some(pd.min_partition_size() / 2 / step * step).filter(|&m| m > 0),
            (Some(pd), _) => Some(pd.partition_count() / 2 / step * step).filter(|&k| k > 0),
            (None, _) => None,
        };
        let ood = config
            .ood_probes
            .iter()
            .enumerate()
            .map(|(i, kind)| {
                let ood_kind = match kind {
                    OodProbe::HeldOutColors => OodKind::all_colors(),
                    OodProbe::HeldOutShapes => OodKind::all_shapes(),
                    OodProbe::Noise => OodKind::Noise,
                };
                let seed = derive_seed(config.data_seed, &[stream::PROBE, 2 + i as u64]);
                let set = make_ood_probe(ood_kind, config.probe_size, config.image_size(), seed)?;
                Ok(Probe { name: kind.probe_name(), images: set.images })
            })
            .collect::<Result<_, RunnerError>>()?;
        Ok(Context { config, train, partitions, size_param, test, test_partitions, ood })
    }

    fn plan(&self, level: Level, seed: u64) -> Result<Plan, RunnerError> {
        let cfg = self.config;
        match (level, &self.partitions) {
            (Level::Alpha(alpha), Some(pd)) if cfg.split_type == SplitType::Dataset => {
                let spec = DatasetSplitSpec { alpha, per_partition: self.size_param, seed };
                Ok(Plan::Split(dataset_split(pd, &spec)?))
            }
            (Level::Alpha(alpha), Some(pd)) => {
                let spec = TaskSplitSpec { alpha, partitions_per_side: self.size_param, seed };
                Ok(Plan::Split(task_split_partitions(pd, &spec)?))
            }
            (Level::Task(level), None) => {
                let (a, b) = task_overlap_pair(&self.train, level);
                Ok(Plan::Relabel(level, Side { ids: a.ids, labels: a.labels }, Side { ids: b.ids, labels: b.labels }))
            }
            _ => Err(RunnerError::Config(format!("level {} does not fit split type {}", level.label(), cfg.split_type))),
        }
    }

    /// Seeded subset of at most `probe_size` ids, in ascending order.
    fn sample(&self, mut candidates: Vec<usize>, tag: u64) -> Vec<usize> {
        candidates.shuffle(&mut rng_from(self.config.data_seed, &[stream::PROBE, tag]));
        candidates.truncate(self.config.probe_size);
        candidates.sort_unstable();
        candidates
    }

    /// In-distribution probe from the test pool (restricted to the trained
    /// partitions for task-partition splits), the excluded-partition probe
    /// when there is one, then the OOD probes.
    fn probes(&self, plan: &Plan) -> Vec<(&'static str, ImageBatch)> {
        let all: Vec<usize> = (0..self.test.len()).collect();
        let mut out = Vec::new();
        match plan {
            Plan::Split(pair) if pair.kind == crate::splitkit::SplitKind::TaskPartition => {
                let trained: BTreeSet<u32> = pair.d1.partition_set().union(&pair.d2.partition_set()).copied().collect();
                let excluded: BTreeSet<u32> = pair.ood_partition_ids.iter().copied().collect();
                let pick = |set: &BTreeSet<u32>| -> Vec<usize> {
                    all.iter().copied().filter(|&i| set.contains(&self.test_partitions[i])).collect()
                };
                out.push((IN_DISTRIBUTION, self.test.images().select(&self.sample(pick(&trained), 0))));
                let ex = self.sample(pick(&excluded), 1);
                if ex.len() >= 3 {
                    out.push((EXCLUDED_PARTITIONS, self.test.images().select(&ex)));
                }
            }
            _ => out.push((IN_DISTRIBUTION, self.test.images().select(&self.sample(all.clone(), 0)))),
        }
        out.extend(self.ood.iter().map(|p| (p.name, p.images.clone())));
        out
    }

    /// Trains the `which`-th model of the pair for run `seed`.
    fn train(&self, side: &Side, seed: u64, which: usize, split_id: &str) -> Result<TrainedModel, RunnerError> {
        let cfg = self.config;
        let mut tc = cfg.train_config(pair_model_seed(seed, which));
        if cfg.shared_init {
            tc.init_seed = Some(seed);
        }
        let images = self.train.images();
        Ok(match cfg.model {
            ModelKind::Classifier => train_classifier(images, &side.ids, &side.labels, cfg.backbone(), &tc, split_id)?,
            ModelKind::Vae => train_vae(images, &side.ids, cfg.backbone(), Some(cfg.latent), &tc, split_id)?,
        })
    }

    /// Trains (or reloads) the pair and scores every probe and metric.
    /// Returns the records and whether the run was resumed from disk.
    fn execute(
        &self,
        out_dir: &Path,
        run_id: &str,
        level: Level,
        seed: u64,
        plan: &Plan,
    ) -> Result<(Vec<ExperimentRecord>, bool), RunnerError> {
        let dir = out_dir.join("runs").join(run_id);
        let records_path = dir.join(RECORDS_FILE);
        if records_path.exists() && dir.join(CHECKPOINT_A).exists() && dir.join(CHECKPOINT_B).exists() {
            if let Ok(records) = load_records(&records_path) {
                return Ok((records, true));
            }
        }
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;

        let (a, b) = match plan {
            Plan::Split(pair) => {
                SplitManifest::from_pair(pair).save(&dir.join(SPLIT_FILE))?;
                let side = |s: &crate::splitkit::SplitSide| Side { ids: s.ids.clone(), labels: s.labels.clone() };
                (side(&pair.d1), side(&pair.d2))
            }
            Plan::Relabel(level, a, b) => {
                let text = toml::to_string(&RelabelSplit { split_type: SplitType::TaskRelabel, level: *level })
                    .map_err(|e| RunnerError::Resume(e.to_string()))?;
                write_atomic(&dir.join(SPLIT_FILE), text.as_bytes())?;
                (Side { ids: a.ids.clone(), labels: a.labels.clone() }, Side { ids: b.ids.clone(), labels: b.labels.clone() })
            }
        };
        let model_a = self.train(&a, seed, 0, run_id)?;
        let model_b = self.train(&b, seed, 1, run_id)?;
        save_checkpoint(&dir.join(CHECKPOINT_A), &model_a)?;
        save_checkpoint(&dir.join(CHECKPOINT_B), &model_b)?;
        // Round-trip so resumed and fresh runs score the same parameters.
        let model_a = load_checkpoint(&dir.join(CHECKPOINT_A))?;
        let model_b = load_checkpoint(&dir.join(CHECKPOINT_B))?;

        let metric_cfg = self.config.metric_config();
        let mut records = Vec::new();
        for (probe, images) in self.probes(plan) {
            let ra = extract_representations(&model_a, &images)?;
            let rb = extract_representations(&model_b, &images)?;
            for &metric in &self.config.metrics {
                let score = similarity(metric, &ra, &rb, &metric_cfg)?;
                records.push(ExperimentRecord {
                    experiment_id: self.config.experiment.clone(),
                    split_type: self.config.split_type,
                    overlap: level.label(),
                    seed,
                    probe_set: probe.to_string(),
                    metric: metric.name().to_string(),
                    value: score.value,
                });
            }
        }
        canonical_sort(&mut records);
        let tmp = records_path.with_extension("tmp");
        save_records(&tmp, &records)?;
        std::fs::rename(&tmp, &records_path).map_err(io_err(&records_path))?;
        // Return what a resumed run would read, so both paths agree exactly.
        Ok((load_records(&records_path)?, false))
    }
}

/// Rebuilds the split a record came from, given the manifest's run entry
/// and the config that produced it.
pub fn reconstruct_split(config: &ExperimentConfig, out_dir: &Path, entry: &RunEntry) -> Result<SplitPair, RunnerError> {
    let path = out_dir.join(entry.split.as_ref().ok_or_else(|| RunnerError::Resume(format!("run {} has no split", entry.run_id)))?);
    let train = generate(&config.dataset_spec(), config.data_seed)?;
    let pd = PartitionedDataset::from_labels(&apply_scheme(&train, config.scheme), train.len())?;
    Ok(SplitManifest::load(&path)?.to_pair(&pd)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simmetrics::Metric;

    fn tiny(split_type: SplitType, out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(split_type);
        cfg.per_combination_count = 1;
        cfg.image_size = 12;
        cfg.conv1 = 4;
        cfg.conv2 = 8;
        cfg.feature_dim = 16;
        cfg.epochs = Some(2);
        cfg.peak_epoch = Some(0.5);
        cfg.batch_size = Some(32);
        cfg.scheme = crate::synthgen::LabelScheme::S;
        cfg.seeds = vec![0, 1];
        cfg.levels = vec!["0".into(), "0.5".into(), "1".into()];
        cfg.metrics = vec![Metric::Cka, Metric::MutualKnn];
        cfg.ood_probes = vec![OodProbe::Noise];
        cfg.probe_size = 20;
        cfg.out = Some(out.to_path_buf());
        cfg
    }

    #[test]
    fn record_count_matches_formula() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(SplitType::Dataset, dir.path());
        let outcome = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        let failed: Vec<_> = outcome.manifest.with_status(RunStatus::Failed).map(|r| r.reason.clone()).collect();
        assert!(failed.is_empty(), "{failed:?}");
        // 3 levels x 2 seeds x 2 metrics x 2 probes
        assert_eq!(outcome.records.len(), 24);
        assert_eq!(outcome.manifest.with_status(RunStatus::Completed).count(), 6);
        for run in &outcome.manifest.runs {
            for c in &run.checkpoints {
                assert!(dir.path().join(c).exists());
            }
            let pair = reconstruct_split(&cfg, dir.path(), run).unwrap();
            assert_eq!(pair.alpha.to_string(), run.overlap);
            assert_eq!(pair.seed, run.seed);
        }
        assert_eq!(load_records(&outcome.records_path()).unwrap(), outcome.records);
    }

    #[test]
    fn infeasible_levels_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(SplitType::TaskPartition, dir.path());
        // 8 shape partitions, K = 4: α = 1/3 makes αK non-integral.
        cfg.levels = vec!["0".into(), "1/3".into(), "1".into()];
        cfg.partitions_per_side = Some(4);
        cfg.seeds = vec![0];
        let outcome = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        let skipped: Vec<_> = outcome.manifest.with_status(RunStatus::Skipped).collect();
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].overlap, "1/3");
        assert!(skipped[0].reason.as_deref().unwrap().contains("1/3"));
        // α = 0 uses all 8 partitions, so only α = 1 has an excluded probe.
        let excluded: BTreeSet<&str> = outcome
            .records
            .iter()
            .filter(|r| r.probe_set == EXCLUDED_PARTITIONS)
            .map(|r| r.overlap.as_str())
            .collect();
        assert_eq!(excluded.into_iter().collect::<Vec<_>>(), vec!["1"]);
    }

    #[test]
    fn default_sizes_fit_every_level() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(SplitType::Dataset, dir.path());
        // 100 per shape partition: m = 50 would make 0.25 * m fractional.
        cfg.levels = vec!["0".into(), "0.25".into()];
        cfg.seeds = vec![3];
        let outcome = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        assert_eq!(outcome.manifest.with_status(RunStatus::Completed).count(), 2);
        let pair = reconstruct_split(&cfg, dir.path(), &outcome.manifest.runs[1]).unwrap();
        assert_eq!(pair.size_param, 48);
    }

    #[test]
    fn resume_reuses_runs_and_rejects_other_configs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(SplitType::TaskRelabel, dir.path());
        let mut cfg = cfg;
        cfg.levels = vec!["1".into(), "3".into()];
        let first = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        let bytes = std::fs::read(first.records_path()).unwrap();
        // Simulate an interruption: drop one run's records and the summary.
        std::fs::remove_file(dir.path().join("runs/3-s1").join(RECORDS_FILE)).unwrap();
        std::fs::remove_file(first.records_path()).unwrap();
        let second = run_sweep(&cfg, &SweepOptions::default()).unwrap();
        assert_eq!(std::fs::read(second.records_path()).unwrap(), bytes);

        let mut other = cfg.clone();
        other.seeds = vec![5];
        assert!(matches!(run_sweep(&other, &SweepOptions::default()), Err(RunnerError::Resume(_))));
    }
}
