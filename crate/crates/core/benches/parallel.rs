//! Sequential (one worker) vs the default rayon pool on the data-parallel
//! hot paths. Build with `--no-default-features` to bench the fallback path
//! without rayon at all.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use repsim_core::par;
use repsim_core::synthgen::{generate, DatasetSpec, ImageSize};
use repsim_core::tinynet::{extract_representations, init_params, ConvArch, ModelArch, Provenance, TrainConfig, TrainedModel};

fn modes() -> [(&'static str, usize); 2] {
    [("sequential", 1), ("pool", 0)]
}

fn bench_generate(c: &mut Criterion) {
    let spec = DatasetSpec::new(1).with_image_size(ImageSize::square(32));
    let mut group = c.benchmark_group("generate_800");
    group.sample_size(10);
    for (name, jobs) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_jobs(jobs, || generate(&spec, 0).unwrap()))
        });
    }
    group.finish();
}

fn bench_extract(c: &mut Criterion) {
    let size = ImageSize::square(32);
    let images = generate(&DatasetSpec::new(1).with_image_size(size), 0).unwrap().images().clone();
    let arch = ModelArch::Classifier { backbone: ConvArch::new(size), classes: 10 };
    let model = TrainedModel {
        params: init_params::<f32>(&arch, 0),
        arch,
        epoch_losses: Vec::new(),
        train_accuracy: None,
        provenance: Provenance { split_id: "bench".into(), seed: 0, config: TrainConfig::default(), examples: 0 },
    };
    let mut group = c.benchmark_group("extract_800");
    group.sample_size(10);
    for (name, jobs) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_jobs(jobs, || extract_representations(&model, &images).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_generate, bench_extract);
criterion_main!(benches);
