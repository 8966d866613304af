use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use repsim_core::analysis::SplitType;
use repsim_core::runner::{
    default_output_root, report, run_sweep, ExperimentConfig, ModelKind, ReportOptions, RunStatus,
    RunnerError, SweepOptions,
};
use repsim_core::simmetrics::{similarity, Metric};
use repsim_core::splitkit::{
    dataset_split, task_split_partitions, verify_overlap, DatasetSplitSpec, PartitionedDataset, Proportion, SplitManifest,
    TaskSplitSpec,
};
use repsim_core::synthgen::{
    apply_scheme, generate, load_dataset, make_ood_probe, save_dataset, DatasetSpec, ImageSize, LabelScheme, OodKind,
};
use repsim_core::tinynet::{
    accuracy, extract_representations, load_checkpoint, save_checkpoint, train_classifier, train_vae,
};

/// Controlled-overlap representational similarity experiments.
#[derive(Parser)]
#[command(name = "repsim", version)]
struct Cli {
    /// Experiment config (TOML). Supplies model and training settings to
    /// `train`, and everything to `sweep`.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed: generation seed for `generate`, split seed for `split`,
    /// model seed for `train`, data seed for `sweep`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: under $REPSIM_OUT, else ./repsim-out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and save it.
    Generate(GenerateArgs),
    /// Split a saved dataset and write the split manifest.
    Split(SplitArgs),
    /// Train one model on a saved dataset or one side of a split.
    Train(TrainArgs),
    /// Score two checkpoints on a probe set.
    Measure(MeasureArgs),
    /// Run a configured sweep and write records.csv.
    Sweep,
    /// Plots and summary tables from a records file.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Images per attribute combination.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 32)]
    image_size: u32,
    /// Label scheme stored with the dataset.
    #[arg(long, default_value = "S+D+C")]
    scheme: LabelScheme,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitKindArg {
    Dataset,
    TaskPartition,
}

#[derive(Args)]
struct SplitArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long = "type", value_enum, default_value = "dataset")]
    kind: SplitKindArg,
    /// Overlap proportion, decimal or fraction.
    #[arg(long)]
    alpha: Proportion,
    /// Scheme whose classes are the partitions [default: the dataset's].
    #[arg(long)]
    scheme: Option<LabelScheme>,
    /// m, examples per partition per side (dataset split).
    #[arg(long)]
    per_partition: Option<usize>,
    /// K, partitions per side (task-partition split).
    #[arg(long)]
    partitions_per_side: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Split manifest; trains on one side of it instead of the whole dataset.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    side: u8,
    /// Label scheme [default: the config's, else the dataset's].
    #[arg(long)]
    scheme: Option<LabelScheme>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeArg {
    /// Images of the dataset given with --dataset.
    Dataset,
    HeldOutColors,
    HeldOutShapes,
    Noise,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum, default_value = "dataset")]
    probe: ProbeArg,
    /// Dataset directory for `--probe dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    probe_size: usize,
    /// Metrics to compute [default: all].
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<Metric>,
}

#[derive(Args)]
struct ReportArgs {
    /// Records file [default: <out>/records.csv].
    #[arg(long)]
    records: Option<PathBuf>,
    /// Quantile bins for MI [default: the config's, else 4].
    #[arg(long)]
    bins: Option<usize>,
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl From<RunnerError> for Failure {
    fn from(e: RunnerError) -> Self {
        Failure { kind: e.kind(), message: e.to_string() }
    }
}

macro_rules! failure_from {
    ($($ty:ty => $kind:literal),*) => {
        $(impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                Failure { kind: $kind, message: e.to_string() }
            }
        })*
    };
}

failure_from!(
    repsim_core::synthgen::SynthError => "synth",
    repsim_core::splitkit::SplitError => "split",
    repsim_core::tinynet::TrainError => "train",
    repsim_core::simmetrics::SimError => "similarity"
);

fn usage(message: impl Into<String>) -> Failure {
    Failure { kind: "usage", message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs;
    match repsim_core::par::with_jobs(jobs, || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn out_dir(cli: &Cli, default_name: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| default_output_root().join(default_name))
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>, Failure> {
    cli.config.as_deref().map(ExperimentConfig::load).transpose().map_err(Failure::from)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Generate(a) => {
            let dir = out_dir(&cli, "dataset");
            let spec = DatasetSpec::new(a.count).with_image_size(ImageSize::square(a.image_size));
            let dataset = generate(&spec, cli.seed.unwrap_or(0))?;
            save_dataset(&dataset, a.scheme, &dir)?;
            println!("{} images -> {}", dataset.len(), dir.display());
        }
        Command::Split(a) => {
            let (dataset, stored) = load_dataset(&a.dataset)?;
            let labeled = apply_scheme(&dataset, a.scheme.unwrap_or(stored));
            let pd = PartitionedDataset::from_labels(&labeled, dataset.len())?;
            let seed = cli.seed.unwrap_or(0);
            let pair = match a.kind {
                SplitKindArg::Dataset => {
                    dataset_split(&pd, &DatasetSplitSpec { alpha: a.alpha, per_partition: a.per_partition, seed })?
                }
                SplitKindArg::TaskPartition => task_split_partitions(
                    &pd,
                    &TaskSplitSpec { alpha: a.alpha, partitions_per_side: a.partitions_per_side, seed },
                )?,
            };
            let report = verify_overlap(&pair);
            if !report.matches() {
                return Err(Failure { kind: "split", message: report.mismatches.join("; ") });
            }
            let dir = out_dir(&cli, "split");
            std::fs::create_dir_all(&dir).map_err(|e| Failure { kind: "io", message: format!("{}: {e}", dir.display()) })?;
            let path = dir.join("split.toml");
            SplitManifest::from_pair(&pair).save(&path)?;
            println!(
                "{} examples per side, {} shared, {} OOD partitions -> {}",
                pair.d1.len(),
                pair.shared_ids().len(),
                pair.ood_partition_ids.len(),
                path.display()
            );
        }
        Command::Train(a) => {
            let config = load_config(&cli)?.unwrap_or_else(|| ExperimentConfig::new(SplitType::Dataset));
            let (dataset, stored) = load_dataset(&a.dataset)?;
            let scheme = a.scheme.or(cli.config.as_ref().map(|_| config.scheme)).unwrap_or(stored);
            let labeled = apply_scheme(&dataset, scheme);
            let (ids, labels) = match &a.split {
                Some(path) => {
                    let pd = PartitionedDataset::from_labels(&labeled, dataset.len())?;
                    let pair = SplitManifest::load(path)?.to_pair(&pd)?;
                    let side = if a.side == 1 { pair.d1 } else { pair.d2 };
                    (side.ids, side.labels)
                }
                None => (labeled.ids, labeled.labels),
            };
            if config.image_size != dataset.images().size().height {
                return Err(usage(format!(
                    "config image_size {} but dataset images are {}",
                    config.image_size,
                    dataset.images().size().height
                )));
            }
            let mut tc = config.train_config(cli.seed.unwrap_or(0));
            if let Some(e) = a.epochs {
                tc.epochs = e;
            }
            let split_id = a.split.as_ref().map_or("full".to_string(), |p| format!("{}#{}", p.display(), a.side));
            let images = dataset.images();
            let model = match config.model {
                ModelKind::Classifier => train_classifier(images, &ids, &labels, config.backbone(), &tc, &split_id)?,
                ModelKind::Vae => train_vae(images, &ids, config.backbone(), Some(config.latent), &tc, &split_id)?,
            };
            let dir = out_dir(&cli, "model");
            std::fs::create_dir_all(&dir).map_err(|e| Failure { kind: "io", message: format!("{}: {e}", dir.display()) })?;
            let path = dir.join("model.rsck");
            save_checkpoint(&path, &model)?;
            let loss = model.epoch_losses.last().copied().unwrap_or(f64::NAN);
            match config.model {
                ModelKind::Classifier => {
                    let acc = accuracy(&model, images, &ids, &labels)?;
                    println!("final loss {loss:.4}, train accuracy {acc:.4} -> {}", path.display());
                }
                ModelKind::Vae => println!("final loss {loss:.4} -> {}", path.display()),
            }
        }
        Command::Measure(a) => {
            let ma = load_checkpoint(&a.a)?;
            let mb = load_checkpoint(&a.b)?;
            let size = ma.arch.backbone().image_size();
            let seed = cli.seed.unwrap_or(0);
            let images = match a.probe {
                ProbeArg::Dataset => {
                    let dir = a.dataset.as_deref().ok_or_else(|| usage("--probe dataset needs --dataset DIR"))?;
                    let (dataset, _) = load_dataset(dir)?;
                    let n = a.probe_size.min(dataset.len());
                    dataset.images().select(&(0..n).collect::<Vec<_>>())
                }
                other => {
                    let kind = match other {
                        ProbeArg::HeldOutColors => OodKind::all_colors(),
                        ProbeArg::HeldOutShapes => OodKind::all_shapes(),
                        _ => OodKind::Noise,
                    };
                    make_ood_probe(kind, a.probe_size, size, seed)?.images
                }
            };
            let ra = extract_representations(&ma, &images)?;
            let rb = extract_representations(&mb, &images)?;
            let metrics = if a.metrics.is_empty() { Metric::ALL.to_vec() } else { a.metrics.clone() };
            let cfg = load_config(&cli)?.map(|c| c.metric_config()).unwrap_or_default();
            println!("metric,value");
            for m in metrics {
                let s = similarity(m, &ra, &rb, &cfg)?;
                println!("{},{}", m.name(), repsim_core::analysis::format_value(s.value));
            }
        }
        Command::Sweep => {
            let path = cli.config.as_deref().ok_or_else(|| usage("sweep needs --config FILE"))?;
            let mut config = ExperimentConfig::load(path)?;
            if let Some(seed) = cli.seed {
                config.data_seed = seed;
            }
            let options = SweepOptions { jobs: cli.jobs, out: cli.out.clone(), progress: true };
            let outcome = run_sweep(&config, &options)?;
            let count = |s| outcome.manifest.with_status(s).count();
            println!(
                "{} runs completed, {} skipped, {} failed; {} records -> {}",
                count(RunStatus::Completed),
                count(RunStatus::Skipped),
                count(RunStatus::Failed),
                outcome.records.len(),
                outcome.records_path().display()
            );
            if count(RunStatus::Failed) > 0 {
                let first = outcome.manifest.with_status(RunStatus::Failed).next().expect("counted");
                return Err(Failure {
                    kind: "run",
                    message: format!("run {} failed: {}", first.run_id, first.reason.as_deref().unwrap_or("")),
                });
            }
        }
        Command::Report(a) => {
            let config = load_config(&cli)?;
            let records = match (&a.records, &cli.out) {
                (Some(r), _) => r.clone(),
                (None, Some(out)) => out.join("records.csv"),
                (None, None) => match &config {
                    Some(c) => c.output_dir().join("records.csv"),
                    None => return Err(usage("report needs --records FILE, --out DIR or --config FILE")),
                },
            };
            let dir = report_dir(&records, cli.out.as_deref());
            let bins = a.bins.or(config.map(|c| c.mi_bins)).unwrap_or(4);
            let outcome = report(&records, &dir, ReportOptions { mi_bins: bins })?;
            println!("{:<10} {:<14} {:<20} {:<12} {:>9} {:>7} {:>7}", "experiment", "split", "probe", "metric", "slope", "r2", "mi");
            let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            for r in &outcome.summary {
                println!(
                    "{:<10} {:<14} {:<20} {:<12} {:>9} {:>7} {:>7}",
                    r.experiment_id,
                    r.split_type.to_string(),
                    r.probe_set,
                    r.metric,
                    f(r.slope),
                    f(r.r2),
                    f(r.mi)
                );
            }
            println!("{} plots, {} and {}", outcome.plots.len(), outcome.summary_path.display(), outcome.mi_path.display());
        }
    }
    Ok(())
}

/// Reports go to `<out>/report`, or next to the records file.
fn report_dir(records: &Path, out: Option<&Path>) -> PathBuf {
    match out {
        Some(o) => o.join("report"),
        None => records.parent().unwrap_or(Path::new(".")).join("report"),
    }
}

