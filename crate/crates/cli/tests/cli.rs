use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
split_type = "dataset"
levels = ["0", "1"]
seeds = [0, 1]
per_combination_count = 1
image_size = 12
scheme = "S"
conv1 = 4
conv2 = 8
feature_dim = 16
epochs = 2
peak_epoch = 0.5
batch_size = 32
metrics = ["cka", "mutual_knn"]
ood_probes = ["noise"]
probe_size = 20
"#;

fn repsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repsim")).args(args).env_remove("REPSIM_OUT").output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_tiny(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.cfg");
    let out = repsim(&["sweep", "--config", s(&missing)]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("missing.cfg"), "{err}");
    assert!(err.starts_with("error: "), "{err}");
}

#[test]
fn unknown_flag_is_rejected() {
    let out = repsim(&["report", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--no-such-flag"));
}

#[test]
fn sweep_without_config_is_a_usage_error() {
    let out = repsim(&["sweep"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--config"));
}

#[test]
fn sweep_is_job_count_independent_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny(dir.path());
    let mut files = Vec::new();
    for jobs in ["1", "4"] {
        let out_dir = dir.path().join(format!("jobs{jobs}"));
        let out = repsim(&["sweep", "--config", &config, "--jobs", jobs, "--out", s(&out_dir)]);
        assert!(out.status.success(), "{}", stderr(&out));
        files.push(std::fs::read(out_dir.join("records.csv")).unwrap());
    }
    assert!(!files[0].is_empty());
    assert_eq!(files[0], files[1]);

    let records = dir.path().join("jobs1/records.csv");
    let out = repsim(&["report", "--records", s(&records)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = dir.path().join("jobs1/report");
    let plots: Vec<_> = std::fs::read_dir(&report)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .collect();
    assert_eq!(plots.len(), 2);
    for p in plots {
        let svg = std::fs::read_to_string(&p).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"), "{}", p.display());
    }
    assert!(std::fs::metadata(report.join("summary.csv")).unwrap().len() > 0);
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny(dir.path());
    let data = dir.path().join("data");
    let out = repsim(&["generate", "--count", "1", "--image-size", "12", "--scheme", "S", "--out", s(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));

    let split = dir.path().join("split");
    let out = repsim(&["split", "--dataset", s(&data), "--alpha", "1/2", "--per-partition", "40", "--out", s(&split)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let split_file = split.join("split.toml");

    let mut models = Vec::new();
    for side in ["1", "2"] {
        let model = dir.path().join(format!("model{side}"));
        let out = repsim(&[
            "train", "--config", &config, "--dataset", s(&data), "--split", s(&split_file), "--side", side, "--out",
            s(&model),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        models.push(model.join("model.rsck"));
    }

    let out = repsim(&[
        "measure", "--a", s(&models[0]), "--b", s(&models[1]), "--probe", "noise", "--probe-size", "30", "--metrics",
        "cka,svcca",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "metric,value");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&v), "{line}");
    }
}
