//! Central finite-difference gradient check on tiny networks.

use rand::{Rng, SeedableRng};
use repsim_core::synthgen::ImageSize;
use repsim_core::tinynet::{
    classifier_loss_and_gradients, init_params, vae_loss_and_gradients, ConvArch, ModelArch,
};

pub const STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor so parameters with near-zero gradient compare absolutely.
pub const FLOOR: f64 = 1e-6;

pub fn tiny_backbone() -> ConvArch {
    ConvArch::new(ImageSize::new(6, 6)).with_channels(2, 3).with_feature_dim(4)
}

pub fn inputs(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()).collect()
}

/// Largest relative error per named parameter group.
pub fn gradient_errors(arch: &ModelArch, loss: impl Fn(&[f64]) -> (f64, Vec<f64>), seed: u64) -> Vec<(&'static str, f64)> {
    let mut params: Vec<f64> = init_params(arch, seed);
    // nonzero biases so every bias path is exercised
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for (_, r) in arch.param_groups().into_iter().skip(1).step_by(2) {
        for p in &mut params[r] {
            *p = rng.gen_range(-0.1..0.1);
        }
    }
    let (_, analytic) = loss(&params);
    let mut out: Vec<(&'static str, f64)> = Vec::new();
    for (name, range) in arch.param_groups() {
        let mut worst = 0.0f64;
        for i in range {
            let orig = params[i];
            params[i] = orig + STEP;
            let up = loss(&params).0;
            params[i] = orig - STEP;
            let down = loss(&params).0;
            params[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(err);
        }
        match out.iter_mut().find(|(n, _)| *n == name) {
            Some(e) => e.1 = e.1.max(worst),
            None => out.push((name, worst)),
        }
    }
    out
}

/// Worst relative error per parameter group of a 3-class classifier on
/// three random inputs.
pub fn classifier_errors() -> Vec<(&'static str, f64)> {
    let arch = ModelArch::Classifier { backbone: tiny_backbone(), classes: 3 };
    let xs = inputs(3, 108, 11);
    gradient_errors(&arch, |p| classifier_loss_and_gradients(&arch, p, &xs, &[0, 2, 1], 0.1), 5)
}

/// Same for a VAE with fixed reparameterization noise.
pub fn vae_errors() -> Vec<(&'static str, f64)> {
    let arch = ModelArch::Vae { backbone: tiny_backbone(), latent: 2, hidden: 5 };
    let xs = inputs(2, 108, 12);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
    let eps: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
    gradient_errors(&arch, |p| vae_loss_and_gradients(&arch, p, &xs, &eps, 1.0), 6)
}
