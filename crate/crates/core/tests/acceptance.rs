//! Acceptance harness. Prints one `criterion N: PASS|FAIL` line per
//! criterion and exits nonzero if any fails.
//!
//! Pass criterion numbers as arguments to run a subset. Set
//! `ACCEPTANCE_OUT` to keep sweep outputs; later runs resume from them.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use repsim_core::analysis::{load_records, mean_trend, mutual_information, save_records, ExperimentRecord, SplitType};
use repsim_core::runner::{
    report, run_sweep, ExperimentConfig, ReportOptions, RunStatus, SweepOptions, SweepOutcome, IN_DISTRIBUTION,
};
use repsim_core::simmetrics::{knn_jaccard, linear_cka, mutual_knn, svcca, svd, Matrix};
use repsim_core::splitkit::{
    dataset_split, task_overlap_pair, task_split_partitions, verify_overlap, DatasetSplitSpec, PartitionedDataset,
    Proportion, TaskLevel, TaskSplitSpec,
};
use repsim_core::synthgen::{apply_scheme, generate, generate_dataset, DatasetSpec, ImageSize, LabelScheme};
use repsim_core::tinynet::{accuracy, train_classifier, ConvArch, TrainConfig};

use common::gradcheck;

const IDENTITY_TOL: f64 = 1e-9;
const CKA_ORACLE_TOL: f64 = 1e-10;
const SVCCA_TOL: f64 = 1e-6;
const ORACLE_INSTANCES: usize = 100;
const METRIC_BUDGET: Duration = Duration::from_secs(10);
const GRADIENT_BUDGET: Duration = Duration::from_secs(30);
const ACCURACY_MIN: f64 = 0.90;
const SLOPE_MIN: f64 = 0.0;
const R2_MIN: f64 = 0.6;
const SWEEP_BUDGET: Duration = Duration::from_secs(30 * 60);
const MI_DETERMINISTIC: f64 = 2.0;
const MI_DETERMINISTIC_TOL: f64 = 1e-9;
const MI_INDEPENDENT_MAX: f64 = 0.1;

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, Box<dyn Fn(&mut Sweeps) -> Outcome>);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

struct Sweeps {
    root: PathBuf,
    dataset: Option<Result<(SweepOutcome, Duration), String>>,
}

impl Sweeps {
    fn run(&self, name: &str) -> Result<(SweepOutcome, Duration), String> {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance").join(format!("{name}.toml"));
        let config = ExperimentConfig::load(&path).map_err(|e| e.to_string())?;
        let options = SweepOptions { out: Some(self.root.join(name)), ..SweepOptions::default() };
        let start = Instant::now();
        let outcome = run_sweep(&config, &options).map_err(|e| e.to_string())?;
        let failed: Vec<String> = outcome
            .manifest
            .with_status(RunStatus::Failed)
            .map(|r| format!("{}: {}", r.run_id, r.reason.clone().unwrap_or_default()))
            .collect();
        check(failed.is_empty(), format!("failed runs: {failed:?}"))?;
        Ok((outcome, start.elapsed()))
    }

    fn dataset(&mut self) -> Result<(SweepOutcome, Duration), String> {
        if self.dataset.is_none() {
            self.dataset = Some(self.run("dataset"));
        }
        self.dataset.clone().unwrap()
    }
}

fn matrix(rows: &common::Rows) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

fn random_matrix(n: usize, d: usize, rng: &mut impl Rng) -> Matrix {
    matrix(&common::random_rows(n, d, rng))
}

fn metric_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut worst_invariance = 0.0f64;
    for _ in 0..20 {
        let x = random_matrix(12, 4, &mut rng);
        let y = random_matrix(12, 4, &mut rng);
        let self_cka = linear_cka(&x, &x).map_err(|e| e.to_string())?;
        check((self_cka - 1.0).abs() <= IDENTITY_TOL, format!("CKA(X,X) = {self_cka}"))?;
        let base = linear_cka(&x, &y).unwrap();
        let q = svd(&random_matrix(4, 4, &mut rng)).unwrap().u;
        let rotated = x.matmul(&q).unwrap();
        let scale = rng.gen_range(0.01..100.0);
        let scaled = Matrix::new(12, 4, x.as_slice().iter().map(|v| v * scale).collect()).unwrap();
        let shift: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let shifted = Matrix::new(12, 4, x.as_slice().iter().enumerate().map(|(i, v)| v + shift[i % 4]).collect()).unwrap();
        for t in [&rotated, &scaled, &shifted] {
            worst_invariance = worst_invariance.max((linear_cka(t, &y).unwrap() - base).abs());
        }
        check(mutual_knn(&x, &x, 3).unwrap() == 1.0, "mutual kNN of identical matrices")?;
        check(knn_jaccard(&x, &x, 3).unwrap() == 1.0, "kNN-Jaccard of identical matrices")?;

        let a = random_matrix(4, 4, &mut rng);
        let mut invertible = a.clone();
        for i in 0..4 {
            invertible[(i, i)] += 3.0;
        }
        let mapped = x.matmul(&invertible).unwrap();
        let tall = random_matrix(12, 4, &mut rng);
        let gap = (svcca(&mapped, &tall, 1.0).unwrap() - svcca(&x, &tall, 1.0).unwrap()).abs();
        check(gap <= SVCCA_TOL, format!("SVCCA changed by {gap:e} under an invertible map"))?;
        let same = svcca(&mapped, &x, 1.0).unwrap();
        check((same - 1.0).abs() <= SVCCA_TOL, format!("SVCCA(XA, X) = {same}"))?;
    }
    check(worst_invariance <= IDENTITY_TOL, format!("CKA invariance error {worst_invariance:e}"))?;

    let mut worst_cka = 0.0f64;
    let mut worst_svcca = 0.0f64;
    for _ in 0..ORACLE_INSTANCES {
        let x = common::random_rows(8, 3, &mut rng);
        let y = common::random_rows(8, 3, &mut rng);
        let (mx, my) = (matrix(&x), matrix(&y));
        worst_cka = worst_cka.max((linear_cka(&mx, &my).unwrap() - common::cka(&x, &y)).abs());
        let (m, j) = common::knn_scores(&x, &y, 2);
        check(mutual_knn(&mx, &my, 2).unwrap() == m, "mutual kNN differs from brute force")?;
        check(knn_jaccard(&mx, &my, 2).unwrap() == j, "kNN-Jaccard differs from brute force")?;
        worst_svcca = worst_svcca.max((svcca(&mx, &my, 0.99).unwrap() - common::svcca(&x, &y, 0.99)).abs());
    }
    check(worst_cka <= CKA_ORACLE_TOL, format!("CKA oracle error {worst_cka:e}"))?;
    check(worst_svcca <= SVCCA_TOL, format!("SVCCA oracle error {worst_svcca:e}"))?;
    let elapsed = start.elapsed();
    check(elapsed < METRIC_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!(
        "invariance {worst_invariance:.1e}, oracle CKA {worst_cka:.1e}, SVCCA {worst_svcca:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn split_exactness() -> Outcome {
    let data = generate_dataset(4, 0).map_err(|e| e.to_string())?;
    let labels = apply_scheme(&data, LabelScheme::SD);
    let pd = PartitionedDataset::from_labels(&labels, data.len()).map_err(|e| e.to_string())?;
    let n = pd.partition_count();
    let (m, k) = (8usize, 20usize);
    let mut checked = 0;
    for (num, den) in [(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)] {
        let alpha = Proportion::new(num, den).unwrap();
        let expected = Ratio::new(num, den);
        for seed in 0..3 {
            let pair = dataset_split(&pd, &DatasetSplitSpec { alpha, per_partition: Some(m), seed })
                .map_err(|e| e.to_string())?;
            let r = verify_overlap(&pair);
            check(r.matches(), format!("dataset alpha {alpha}: {:?}", r.mismatches))?;
            check(r.data_point_overlap == Some(expected), format!("dataset alpha {alpha}: {:?}", r.data_point_overlap))?;
            check(pair.d1.len() == pair.d2.len() && r.equal_size, "dataset sides differ in size")?;

            let pair = task_split_partitions(&pd, &TaskSplitSpec { alpha, partitions_per_side: Some(k), seed })
                .map_err(|e| e.to_string())?;
            let r = verify_overlap(&pair);
            check(r.matches(), format!("task alpha {alpha}: {:?}", r.mismatches))?;
            check(r.partition_overlap == Some(expected), format!("task alpha {alpha}: {:?}", r.partition_overlap))?;
            check(pair.d1.len() == pair.d2.len() && r.equal_size, "task sides differ in size")?;
            let want_ood = n as f64 - k as f64 * (2.0 - alpha.to_f64());
            check(
                pair.ood_partition_ids.len() as f64 == want_ood,
                format!("task alpha {alpha}: {} OOD partitions, want {want_ood}", pair.ood_partition_ids.len()),
            )?;
            checked += 2;
        }
    }
    Ok(format!("{checked} splits exact, {n} partitions, m = {m}, K = {k}"))
}

fn table_one() -> Outcome {
    let data = generate_dataset(1, 0).map_err(|e| e.to_string())?;
    let got: Vec<(u32, u32)> = TaskLevel::ALL
        .iter()
        .map(|&l| {
            let (a, b) = task_overlap_pair(&data, l);
            (a.class_count, b.class_count)
        })
        .collect();
    let want = vec![(8, 10), (80, 80), (80, 100), (80, 100), (800, 800)];
    check(got == want, format!("class counts {got:?}"))?;
    Ok(got.iter().map(|(a, b)| format!("{a}/{b}")).collect::<Vec<_>>().join(", "))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut errors = gradcheck::classifier_errors();
    errors.extend(gradcheck::vae_errors());
    let elapsed = start.elapsed();
    let (name, worst) = errors.iter().copied().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    check(worst < gradcheck::REL_TOL, format!("{name}: relative error {worst:e}"))?;
    check(elapsed < GRADIENT_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("{} parameter groups, worst {worst:.1e} ({name}), {:.2}s", errors.len(), elapsed.as_secs_f64()))
}

fn training_sanity() -> Outcome {
    let size = ImageSize::square(32);
    let train = generate(&DatasetSpec::new(8).with_image_size(size), 1).map_err(|e| e.to_string())?;
    let test = generate(&DatasetSpec::new(1).with_image_size(size), 999).map_err(|e| e.to_string())?;
    let (tl, vl) = (apply_scheme(&train, LabelScheme::SD), apply_scheme(&test, LabelScheme::SD));
    let arch = ConvArch::new(size).with_channels(8, 16);
    let cfg = TrainConfig { epochs: 10, lr: 0.05, batch_size: 32, peak_epoch: 2.0, seed: 1, ..TrainConfig::default() };
    let fit = || train_classifier(train.images(), &tl.ids, &tl.labels, arch, &cfg, "acceptance");
    let model = fit().map_err(|e| e.to_string())?;
    let acc = accuracy(&model, test.images(), &vl.ids, &vl.labels).map_err(|e| e.to_string())?;
    check(acc >= ACCURACY_MIN, format!("{}-class test accuracy {acc:.4}", tl.class_count))?;
    let again = fit().map_err(|e| e.to_string())?;
    let same = model.params.iter().zip(&again.params).all(|(a, b)| a.to_bits() == b.to_bits());
    check(same && model.params.len() == again.params.len(), "re-run parameters differ")?;
    Ok(format!("{}-class test accuracy {acc:.4}, re-run bit-exact", tl.class_count))
}

fn in_distribution_cka(records: &[ExperimentRecord]) -> Vec<&ExperimentRecord> {
    records.iter().filter(|r| r.probe_set == IN_DISTRIBUTION && r.metric == "cka").collect()
}

fn dataset_trend(sweeps: &mut Sweeps) -> Outcome {
    let (outcome, elapsed) = sweeps.dataset()?;
    let points: Vec<(f64, f64)> =
        in_distribution_cka(&outcome.records).iter().map(|r| (r.overlap_x().unwrap(), r.value)).collect();
    check(points.len() == 25, format!("{} in-distribution CKA values, want 25", points.len()))?;
    let t = mean_trend(&points).map_err(|e| e.to_string())?;
    let means: Vec<String> = t.levels.iter().map(|l| format!("{:.3}", l.stats.mean)).collect();
    let summary = format!("slope {:.4}, r2 {:.3}, means [{}], {:.0}s", t.slope, t.r2, means.join(" "), elapsed.as_secs_f64());
    check(t.slope > SLOPE_MIN && t.r2 >= R2_MIN, summary.clone())?;
    check(elapsed < SWEEP_BUDGET, format!("took {elapsed:?}"))?;
    Ok(summary)
}

fn relabel_trend(sweeps: &mut Sweeps) -> Outcome {
    let (outcome, _) = sweeps.run("relabel")?;
    let cka = in_distribution_cka(&outcome.records);
    let mean = |level: &str| {
        let v: Vec<f64> = cka.iter().filter(|r| r.overlap == level).map(|r| r.value).collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let ((low, n1), (high, n3)) = (mean("1"), mean("3"));
    check(n1 == 5 && n3 == 5, format!("{n1} and {n3} seeds at levels 1 and 3"))?;
    let summary = format!("mean CKA level 1 {low:.3}, level 3 {high:.3}");
    check(high > low, summary.clone())?;
    Ok(summary)
}

fn mi_ordering(sweeps: &mut Sweeps) -> Outcome {
    let (dataset, _) = sweeps.dataset()?;
    let (task, _) = sweeps.run("task_partition")?;
    let mut records = load_records(&dataset.records_path()).map_err(|e| e.to_string())?;
    records.extend(load_records(&task.records_path()).map_err(|e| e.to_string())?);
    let dir = sweeps.root.join("report");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let combined = dir.join("records.csv");
    save_records(&combined, &records).map_err(|e| e.to_string())?;
    let out = report(&combined, &dir, ReportOptions::default()).map_err(|e| e.to_string())?;
    let mi = |s| out.mi_for(s, IN_DISTRIBUTION, "cka").ok_or_else(|| format!("no MI for {s}"));
    let (d, t) = (mi(SplitType::Dataset)?, mi(SplitType::TaskPartition)?);
    let summary = format!("MI task+dataset {t:.3} bits, dataset {d:.3} bits");
    check(t > d, summary.clone())?;
    Ok(summary)
}

fn mi_sanity() -> Outcome {
    let xs: Vec<u8> = (0..100).map(|i| i % 4).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| 10.0 * x as f64 - 3.0).collect();
    let det = mutual_information(&xs, &ys, 4).map_err(|e| e.to_string())?;
    check((det - MI_DETERMINISTIC).abs() <= MI_DETERMINISTIC_TOL, format!("deterministic MI {det}"))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let xs: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..4)).collect();
    let ys: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..1.0)).collect();
    let ind = mutual_information(&xs, &ys, 4).map_err(|e| e.to_string())?;
    check(ind < MI_INDEPENDENT_MAX, format!("independent MI {ind}"))?;
    Ok(format!("deterministic {det}, independent {ind:.4}"))
}

fn determinism(sweeps: &mut Sweeps) -> Outcome {
    let mut cfg = ExperimentConfig::new(SplitType::Dataset);
    cfg.per_combination_count = 1;
    cfg.image_size = 12;
    cfg.scheme = LabelScheme::S;
    cfg.conv1 = 4;
    cfg.conv2 = 8;
    cfg.feature_dim = 16;
    cfg.epochs = Some(2);
    cfg.peak_epoch = Some(0.5);
    cfg.batch_size = Some(32);
    cfg.seeds = vec![0, 1];
    cfg.levels = vec!["0".into(), "0.5".into(), "1".into()];
    cfg.probe_size = 40;
    let mut files = Vec::new();
    for jobs in [1, 4] {
        let out = sweeps.root.join(format!("determinism-jobs{jobs}"));
        let _ = std::fs::remove_dir_all(&out);
        let outcome = run_sweep(&cfg, &SweepOptions { jobs, out: Some(out), progress: false }).map_err(|e| e.to_string())?;
        files.push(std::fs::read(outcome.records_path()).map_err(|e| e.to_string())?);
    }
    check(!files[0].is_empty() && files[0] == files[1], "records differ between --jobs 1 and --jobs 4")?;
    Ok(format!("{} byte records file identical for jobs 1 and 4", files[0].len()))
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let keep = std::env::var_os("ACCEPTANCE_OUT").map(PathBuf::from);
    let temp = tempfile::tempdir().expect("temp dir");
    let root = keep.unwrap_or_else(|| temp.path().to_path_buf());
    let mut sweeps = Sweeps { root, dataset: None };

    let criteria: Vec<Criterion> = vec![
        (1, "metric correctness", Box::new(|_| metric_suite())),
        (2, "split exactness", Box::new(|_| split_exactness())),
        (3, "task-relabel class counts", Box::new(|_| table_one())),
        (4, "gradient check", Box::new(|_| gradient_check())),
        (5, "training sanity", Box::new(|_| training_sanity())),
        (6, "dataset-overlap trend", Box::new(dataset_trend)),
        (7, "task-relabel trend", Box::new(relabel_trend)),
        (8, "MI ordering", Box::new(mi_ordering)),
        (9, "MI estimator sanity", Box::new(|_| mi_sanity())),
        (10, "pipeline determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (n, name, f) in &criteria {
        if !wanted.is_empty() && !wanted.contains(n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(|| f(&mut sweeps)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match result {
            Ok(detail) => println!("criterion {n}: PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
