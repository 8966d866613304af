use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::arch::{ConvArch, ModelArch, DEFAULT_DECODER_HIDDEN, DEFAULT_LATENT};
use super::network::{argmax, init_params, Workspace};
use super::TrainError;
use crate::par;
use crate::rng::{derive_seed, rng_from, stream};
use crate::simmetrics::Matrix;
use crate::synthgen::ImageBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Peak learning rate of the triangular schedule.
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub label_smoothing: f64,
    /// Epoch (fractional allowed) at which the learning rate peaks.
    pub peak_epoch: f64,
    /// Drives shuffling and VAE noise, and initialization unless
    /// `init_seed` is set.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_seed: Option<u64>,
    /// KL weight, VAE only.
    pub beta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 10,
            batch_size: 128,
            momentum: 0.9,
            weight_decay: 5e-4,
            label_smoothing: 0.1,
            peak_epoch: 2.0,
            seed: 0,
            init_seed: None,
            beta: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn vae() -> Self {
        Self { lr: 1e-3, label_smoothing: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing must be in [0, 1)");
        }
        if !(0.0..=self.epochs as f64).contains(&self.peak_epoch) {
            return bad("peak_epoch must lie within the training epochs");
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return bad("beta must be non-negative");
        }
        Ok(())
    }

    /// Learning rate of iteration `iter`: linear from 0 up to `lr` at
    /// `peak_epoch`, then linear down to 0 at the last epoch, sampled at the
    /// middle of the iteration.
    pub fn lr_at(&self, iter: usize, iters_per_epoch: usize) -> f64 {
        let t = (iter as f64 + 0.5) / iters_per_epoch as f64;
        let end = self.epochs as f64;
        let frac = if t <= self.peak_epoch && self.peak_epoch > 0.0 {
            t / self.peak_epoch
        } else {
            ((end - t) / (end - self.peak_epoch)).max(0.0)
        };
        self.lr * frac.min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub split_id: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub arch: ModelArch,
    pub params: Vec<f32>,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Training-set accuracy after the final epoch (classifiers only).
    pub train_accuracy: Option<f64>,
    pub provenance: Provenance,
}

impl TrainedModel {
    pub fn backbone_params(&self) -> &[f32] {
        let o = super::arch::Offsets::new(&self.arch);
        &self.params[..o.backbone_len]
    }
}

struct Sgd {
    velocity: Vec<f32>,
    momentum: f32,
    weight_decay: f32,
}

impl Sgd {
    /// `v = μ v + (g + λ θ)`, `θ -= lr v`.
    fn step(&mut self, params: &mut [f32], grad: &[f32], lr: f32) {
        for ((p, &g), v) in params.iter_mut().zip(grad).zip(&mut self.velocity) {
            *v = self.momentum * *v + g + self.weight_decay * *p;
            *p -= lr * *v;
        }
    }
}

struct Divergence {
    first: Option<f64>,
    strikes: usize,
}

impl Divergence {
    fn batch(&mut self, epoch: usize, loss: f64) -> Result<(), TrainError> {
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch, loss, reason: "non-finite loss".into() });
        }
        self.first.get_or_insert(loss);
        Ok(())
    }

    fn epoch(&mut self, epoch: usize, loss: f64) -> Result<(), TrainError> {
        let first = self.first.unwrap_or(loss);
        if loss > 10.0 * first {
            self.strikes += 1;
            if self.strikes >= 3 {
                return Err(TrainError::Diverged {
                    epoch,
                    loss,
                    reason: format!("loss above 10x its initial value {first:.4} for 3 epochs"),
                });
            }
        } else {
            self.strikes = 0;
        }
        Ok(())
    }
}

fn check_images(arch: &ConvArch, images: &ImageBatch) -> Result<(), TrainError> {
    if images.size() != arch.image_size() {
        return Err(TrainError::Shape(format!(
            "images are {}x{}, model expects {}x{}",
            images.size().width,
            images.size().height,
            arch.width,
            arch.height
        )));
    }
    Ok(())
}

/// Trains a classifier on `ids` of `images` with labels in `[0, C)`, where
/// `C = max label + 1`.
pub fn train_classifier(
    images: &ImageBatch,
    ids: &[usize],
    labels: &[u32],
    backbone: ConvArch,
    config: &TrainConfig,
    split_id: &str,
) -> Result<TrainedModel, TrainError> {
    config.validate()?;
    if ids.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if ids.len() != labels.len() {
        return Err(TrainError::Shape(format!("{} ids but {} labels", ids.len(), labels.len())));
    }
    check_images(&backbone, images)?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let arch = ModelArch::Classifier { backbone, classes };
    arch.validate()?;

    let mut params: Vec<f32> = init_params(&arch, config.init_seed.unwrap_or(config.seed));
    let mut grad = vec![0.0f32; params.len()];
    let mut sgd = Sgd { velocity: vec![0.0; params.len()], momentum: config.momentum as f32, weight_decay: config.weight_decay as f32 };
    let mut ws = Workspace::<f32>::new(&arch);
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let iters = ids.len().div_ceil(config.batch_size);
    let mut guard = Divergence { first: None, strikes: 0 };
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let smoothing = config.label_smoothing as f32;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng_from(config.seed, &[stream::SHUFFLE, epoch as u64]));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            grad.fill(0.0);
            let mut loss = 0.0f64;
            for &j in batch {
                ws.load_image(images.image(ids[j]));
                loss += ws.classifier_step(&params, labels[j] as usize, smoothing, &mut grad).0 as f64;
            }
            loss /= batch.len() as f64;
            guard.batch(epoch, loss)?;
            super::network::scale(&mut grad, batch.len());
            let lr = config.lr_at(epoch * iters + b, iters) as f32;
            sgd.step(&mut params, &grad, lr);
            epoch_loss += loss * batch.len() as f64;
        }
        let mean = epoch_loss / ids.len() as f64;
        epoch_losses.push(mean);
        guard.epoch(epoch, mean)?;
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(TrainError::Diverged { epoch: config.epochs, loss: f64::NAN, reason: "non-finite parameters".into() });
    }

    let mut model = TrainedModel {
        arch,
        params,
        epoch_losses,
        train_accuracy: None,
        provenance: Provenance { split_id: split_id.into(), seed: config.seed, config: config.clone(), examples: ids.len() },
    };
    model.train_accuracy = Some(accuracy(&model, images, ids, labels)?);
    Ok(model)
}

/// Trains a VAE on `ids` of `images`; noise is drawn from a seeded stream.
pub fn train_vae(
    images: &ImageBatch,
    ids: &[usize],
    backbone: ConvArch,
    latent: Option<u32>,
    config: &TrainConfig,
    split_id: &str,
) -> Result<TrainedModel, TrainError> {
    config.validate()?;
    if ids.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    check_images(&backbone, images)?;
    let arch = ModelArch::Vae { backbone, latent: latent.unwrap_or(DEFAULT_LATENT), hidden: DEFAULT_DECODER_HIDDEN };
    arch.validate()?;

    let mut params: Vec<f32> = init_params(&arch, config.init_seed.unwrap_or(config.seed));
    let mut grad = vec![0.0f32; params.len()];
    let mut sgd = Sgd { velocity: vec![0.0; params.len()], momentum: config.momentum as f32, weight_decay: config.weight_decay as f32 };
    let mut ws = Workspace::<f32>::new(&arch);
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let iters = ids.len().div_ceil(config.batch_size);
    let mut guard = Divergence { first: None, strikes: 0 };
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let beta = config.beta as f32;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng_from(config.seed, &[stream::SHUFFLE, epoch as u64]));
        let mut noise = rng_from(config.seed, &[stream::EPSILON, epoch as u64]);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            grad.fill(0.0);
            let mut loss = 0.0f64;
            for &j in batch {
                ws.load_image(images.image(ids[j]));
                for e in ws.eps.iter_mut() {
                    *e = StandardNormal.sample(&mut noise);
                }
                loss += ws.vae_step(&params, beta, &mut grad).0 as f64;
            }
            loss /= batch.len() as f64;
            guard.batch(epoch, loss)?;
            super::network::scale(&mut grad, batch.len());
            let lr = config.lr_at(epoch * iters + b, iters) as f32;
            sgd.step(&mut params, &grad, lr);
            epoch_loss += loss * batch.len() as f64;
        }
        let mean = epoch_loss / ids.len() as f64;
        epoch_losses.push(mean);
        guard.epoch(epoch, mean)?;
    }
    Ok(TrainedModel {
        arch,
        params,
        epoch_losses,
        train_accuracy: None,
        provenance: Provenance { split_id: split_id.into(), seed: config.seed, config: config.clone(), examples: ids.len() },
    })
}

const EXTRACT_CHUNK: usize = 64;

/// Backbone output (classifier) or encoder mean (VAE) for every image, one
/// row per image.
pub fn extract_representations(model: &TrainedModel, images: &ImageBatch) -> Result<Matrix, TrainError> {
    if images.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    check_images(model.arch.backbone(), images)?;
    let d = model.arch.representation_dim();
    let mut out = vec![0.0f64; images.len() * d];
    par::for_each_chunk_mut(&mut out, EXTRACT_CHUNK * d, |c, chunk| {
        let mut ws = Workspace::<f32>::new(&model.arch);
        for (r, row) in chunk.chunks_exact_mut(d).enumerate() {
            ws.load_image(images.image(c * EXTRACT_CHUNK + r));
            let rep = match model.arch {
                ModelArch::Classifier { .. } => {
                    ws.backbone_forward(&model.params);
                    &ws.h
                }
                ModelArch::Vae { .. } => {
                    ws.encoder_forward(&model.params);
                    &ws.out
                }
            };
            for (o, &v) in row.iter_mut().zip(rep) {
                *o = v as f64;
            }
        }
    });
    Matrix::new(images.len(), d, out).map_err(|e| TrainError::Shape(e.to_string()))
}

/// Arg-max class predictions for `ids` of `images`.
pub fn predict(model: &TrainedModel, images: &ImageBatch, ids: &[usize]) -> Result<Vec<u32>, TrainError> {
    let ModelArch::Classifier { .. } = model.arch else {
        return Err(TrainError::Config("predictions need a classifier".into()));
    };
    check_images(model.arch.backbone(), images)?;
    let chunks: Vec<&[usize]> = ids.chunks(EXTRACT_CHUNK).collect();
    let parts = par::map(&chunks, |chunk| {
        let mut ws = Workspace::<f32>::new(&model.arch);
        chunk
            .iter()
            .map(|&i| {
                ws.load_image(images.image(i));
                ws.classifier_forward(&model.params);
                argmax(&ws.out) as u32
            })
            .collect::<Vec<u32>>()
    });
    Ok(parts.concat())
}

pub fn accuracy(model: &TrainedModel, images: &ImageBatch, ids: &[usize], labels: &[u32]) -> Result<f64, TrainError> {
    if ids.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let pred = predict(model, images, ids)?;
    Ok(pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / ids.len() as f64)
}

/// Seed of the `which`-th model in a pair trained from `seed`.
pub fn pair_model_seed(seed: u64, which: usize) -> u64 {
    derive_seed(seed, &[if which == 0 { stream::MODEL_A } else { stream::MODEL_B }])
}
