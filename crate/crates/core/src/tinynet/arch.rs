use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::synthgen::ImageSize;

pub const DEFAULT_CONV1: u32 = 16;
pub const DEFAULT_CONV2: u32 = 32;
pub const DEFAULT_FEATURE_DIM: u32 = 64;
pub const DEFAULT_LATENT: u32 = 32;
pub const DEFAULT_DECODER_HIDDEN: u32 = 128;
pub(crate) const IN_CHANNELS: usize = 3;

/// Backbone: two conv3x3(pad 1)-ReLU-maxpool2 blocks, then a dense layer
/// with ReLU whose output is the representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvArch {
    pub height: u32,
    pub width: u32,
    pub conv1: u32,
    pub conv2: u32,
    pub feature_dim: u32,
}

impl ConvArch {
    pub fn new(size: ImageSize) -> Self {
        Self {
            height: size.height,
            width: size.width,
            conv1: DEFAULT_CONV1,
            conv2: DEFAULT_CONV2,
            feature_dim: DEFAULT_FEATURE_DIM,
        }
    }

    pub fn with_channels(mut self, conv1: u32, conv2: u32) -> Self {
        self.conv1 = conv1;
        self.conv2 = conv2;
        self
    }

    pub fn with_feature_dim(mut self, d: u32) -> Self {
        self.feature_dim = d;
        self
    }

    pub fn image_size(&self) -> ImageSize {
        ImageSize::new(self.width, self.height)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.height < 4 || self.width < 4 {
            return Err(TrainError::Config(format!("input {}x{} smaller than 4x4", self.width, self.height)));
        }
        if self.conv1 == 0 || self.conv2 == 0 || self.feature_dim == 0 {
            return Err(TrainError::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn input_len(&self) -> usize {
        IN_CHANNELS * self.height as usize * self.width as usize
    }

    /// Spatial sizes after each block: (h, w), (h/2, w/2), (h/4, w/4).
    pub(crate) fn spatial(&self) -> [(usize, usize); 3] {
        let (h, w) = (self.height as usize, self.width as usize);
        [(h, w), (h / 2, w / 2), (h / 4, w / 4)]
    }

    pub(crate) fn flat_len(&self) -> usize {
        let (h, w) = self.spatial()[2];
        self.conv2 as usize * h * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelArch {
    Classifier { backbone: ConvArch, classes: u32 },
    /// Encoder is the backbone plus mean and log-variance heads; decoder is
    /// dense-ReLU-dense-sigmoid back to pixels.
    Vae { backbone: ConvArch, latent: u32, hidden: u32 },
}

impl ModelArch {
    pub fn backbone(&self) -> &ConvArch {
        match self {
            ModelArch::Classifier { backbone, .. } | ModelArch::Vae { backbone, .. } => backbone,
        }
    }

    /// Width of the representation rows.
    pub fn representation_dim(&self) -> usize {
        match *self {
            ModelArch::Classifier { backbone, .. } => backbone.feature_dim as usize,
            ModelArch::Vae { latent, .. } => latent as usize,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.backbone().validate()?;
        match *self {
            ModelArch::Classifier { classes, .. } if classes < 2 => {
                Err(TrainError::Config(format!("{classes} classes, at least 2 needed")))
            }
            ModelArch::Vae { latent, hidden, .. } if latent == 0 || hidden == 0 => {
                Err(TrainError::Config("latent and hidden widths must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn param_count(&self) -> usize {
        Offsets::new(self).total
    }

    /// Named parameter ranges in the flat vector, backbone first.
    pub fn param_groups(&self) -> Vec<(&'static str, Range<usize>)> {
        let o = Offsets::new(self);
        let mut groups = Vec::new();
        let mut push = |name: &'static str, d: Dense| {
            groups.push((name, d.w..d.b));
            groups.push((name, d.b..d.end()));
        };
        push("conv1", o.conv1);
        push("conv2", o.conv2);
        push("fc", o.fc);
        match o.head {
            HeadOffsets::Classifier(h) => push("head", h),
            HeadOffsets::Vae { mu, logvar, dec1, dec2 } => {
                push("mu", mu);
                push("logvar", logvar);
                push("dec1", dec1);
                push("dec2", dec2);
            }
        }
        groups
    }
}

/// A weight matrix `out x inp` at `w`, followed by `out` biases at `b`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dense {
    pub w: usize,
    pub b: usize,
    pub out: usize,
    pub inp: usize,
}

impl Dense {
    fn at(offset: usize, out: usize, inp: usize) -> Self {
        Self { w: offset, b: offset + out * inp, out, inp }
    }

    pub fn end(&self) -> usize {
        self.b + self.out
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum HeadOffsets {
    Classifier(Dense),
    Vae { mu: Dense, logvar: Dense, dec1: Dense, dec2: Dense },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Offsets {
    pub conv1: Dense,
    pub conv2: Dense,
    pub fc: Dense,
    pub head: HeadOffsets,
    pub backbone_len: usize,
    pub total: usize,
}

impl Offsets {
    pub fn new(arch: &ModelArch) -> Self {
        let b = arch.backbone();
        let (c1, c2, d) = (b.conv1 as usize, b.conv2 as usize, b.feature_dim as usize);
        let conv1 = Dense::at(0, c1, IN_CHANNELS * 9);
        let conv2 = Dense::at(conv1.end(), c2, c1 * 9);
        let fc = Dense::at(conv2.end(), d, b.flat_len());
        let backbone_len = fc.end();
        let (head, total) = match *arch {
            ModelArch::Classifier { classes, .. } => {
                let h = Dense::at(backbone_len, classes as usize, d);
                (HeadOffsets::Classifier(h), h.end())
            }
            ModelArch::Vae { latent, hidden, .. } => {
                let (z, hd) = (latent as usize, hidden as usize);
                let mu = Dense::at(backbone_len, z, d);
                let logvar = Dense::at(mu.end(), z, d);
                let dec1 = Dense::at(logvar.end(), hd, z);
                let dec2 = Dense::at(dec1.end(), b.input_len(), hd);
                (HeadOffsets::Vae { mu, logvar, dec1, dec2 }, dec2.end())
            }
        };
        Self { conv1, conv2, fc, head, backbone_len, total }
    }

    pub fn layers(&self) -> Vec<Dense> {
        let mut v = vec![self.conv1, self.conv2, self.fc];
        match self.head {
            HeadOffsets::Classifier(h) => v.push(h),
            HeadOffsets::Vae { mu, logvar, dec1, dec2 } => v.extend([mu, logvar, dec1, dec2]),
        }
        v
    }
}
