//! Small convolutional classifier and VAE trained by hand-written
//! backpropagation. The classifier's backbone output (the layer before the
//! linear head) and the VAE's encoder mean are the representations compared
//! downstream.

mod arch;
mod checkpoint;
mod layers;
mod network;
mod real;
mod train;

pub use arch::{ConvArch, ModelArch, DEFAULT_CONV1, DEFAULT_CONV2, DEFAULT_DECODER_HIDDEN, DEFAULT_FEATURE_DIM, DEFAULT_LATENT};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use network::{classifier_logits, classifier_loss_and_gradients, init_params, kl_divergence, vae_loss_and_gradients};
pub use real::Real;
pub use train::{
    accuracy, extract_representations, pair_model_seed, predict, train_classifier, train_vae, Provenance, TrainConfig,
    TrainedModel,
};

/// CHW `[0, 1]` input vector for an HWC `u8` image of the given size.
pub fn image_to_input<T: Real>(pixels: &[u8], height: usize, width: usize) -> Vec<T> {
    let mut out = vec![T::zero(); pixels.len()];
    network::to_chw(pixels, height, width, &mut out);
    out
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at epoch {epoch} (loss {loss}): {reason}")]
    Diverged { epoch: usize, loss: f64, reason: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
