//! Checkpoint layout, all integers little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `RSCK` |
//! | 4 | u32 format version (1) |
//! | 1 | u8 kind: 0 classifier, 1 VAE |
//! | 4 × 7 | u32 height, width, conv1, conv2, feature_dim, head (classes or latent), decoder hidden (0 for classifiers) |
//! | 8 | u64 parameter count `P` |
//! | 4 × P | f32 parameters, backbone first |
//! | 4 | u32 length `L` of the metadata |
//! | L | UTF-8 JSON: provenance, per-epoch losses, train accuracy |

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{ConvArch, ModelArch};
use super::train::{Provenance, TrainedModel};
use super::TrainError;

const MAGIC: &[u8; 4] = b"RSCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    provenance: Provenance,
    epoch_losses: Vec<f64>,
    train_accuracy: Option<f64>,
}

pub fn write_checkpoint<W: Write>(mut w: W, model: &TrainedModel) -> Result<(), TrainError> {
    let b = model.arch.backbone();
    let (kind, head, hidden) = match model.arch {
        ModelArch::Classifier { classes, .. } => (0u8, classes, 0),
        ModelArch::Vae { latent, hidden, .. } => (1u8, latent, hidden),
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind])?;
    for v in [b.height, b.width, b.conv1, b.conv2, b.feature_dim, head, hidden] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(model.params.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(model.params.len() * 4);
    for p in &model.params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&buf)?;
    let meta = serde_json::to_vec(&Metadata {
        provenance: model.provenance.clone(),
        epoch_losses: model.epoch_losses.clone(),
        train_accuracy: model.train_accuracy,
    })
    .map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(&meta)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, TrainError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<TrainedModel, TrainError> {
    let bad = |m: &str| TrainError::Checkpoint(m.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(TrainError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut kind = [0u8];
    r.read_exact(&mut kind)?;
    let mut f = [0u32; 7];
    for v in &mut f {
        *v = read_u32(&mut r)?;
    }
    let backbone = ConvArch { height: f[0], width: f[1], conv1: f[2], conv2: f[3], feature_dim: f[4] };
    let arch = match kind[0] {
        0 => ModelArch::Classifier { backbone, classes: f[5] },
        1 => ModelArch::Vae { backbone, latent: f[5], hidden: f[6] },
        k => return Err(TrainError::Checkpoint(format!("unknown model kind {k}"))),
    };
    arch.validate()?;
    let mut count = [0u8; 8];
    r.read_exact(&mut count)?;
    let count = u64::from_le_bytes(count) as usize;
    if count != arch.param_count() {
        return Err(TrainError::Checkpoint(format!("{count} parameters, architecture needs {}", arch.param_count())));
    }
    let mut raw = vec![0u8; count * 4];
    r.read_exact(&mut raw)?;
    let params = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let len = read_u32(&mut r)? as usize;
    let mut meta = vec![0u8; len];
    r.read_exact(&mut meta)?;
    let meta: Metadata = serde_json::from_slice(&meta).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    Ok(TrainedModel {
        arch,
        params,
        epoch_losses: meta.epoch_losses,
        train_accuracy: meta.train_accuracy,
        provenance: meta.provenance,
    })
}

pub fn save_checkpoint(path: &Path, model: &TrainedModel) -> Result<(), TrainError> {
    let f = std::fs::File::create(path).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel, TrainError> {
    let f = std::fs::File::open(path).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))?;
    read_checkpoint(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::super::network::init_params;
    use super::super::train::TrainConfig;
    use super::*;
    use crate::synthgen::ImageSize;

    fn model(arch: ModelArch) -> TrainedModel {
        TrainedModel {
            arch,
            params: init_params(&arch, 9),
            epoch_losses: vec![2.5, 1.25],
            train_accuracy: Some(0.75),
            provenance: Provenance { split_id: "dataset/0.5/3".into(), seed: 3, config: TrainConfig::default(), examples: 40 },
        }
    }

    #[test]
    fn round_trip() {
        let backbone = ConvArch::new(ImageSize::square(8)).with_channels(2, 3);
        for arch in [
            ModelArch::Classifier { backbone, classes: 5 },
            ModelArch::Vae { backbone, latent: 4, hidden: 6 },
        ] {
            let m = model(arch);
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &m).unwrap();
            assert_eq!(&buf[..4], b"RSCK");
            assert_eq!(read_checkpoint(&buf[..]).unwrap(), m);
        }
    }

    #[test]
    fn corrupt_files_rejected() {
        let backbone = ConvArch::new(ImageSize::square(8)).with_channels(2, 3);
        let m = model(ModelArch::Classifier { backbone, classes: 5 });
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(read_checkpoint(&wrong[..]).is_err());
        let mut count = buf.clone();
        count[37] ^= 1;
        assert!(matches!(read_checkpoint(&count[..]), Err(TrainError::Checkpoint(_))));
    }
}
