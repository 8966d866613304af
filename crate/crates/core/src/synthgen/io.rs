//! On-disk dataset layout. A dataset directory holds three files:
//!
//! * `manifest.toml` with keys `format = "repsim-dataset"`, `version = 1`,
//!   `seed`, `per_combination_count`, `count`, `width`, `height`,
//!   `channels = 3`, and `scheme` (the scheme of the `label` column);
//! * `images.bin`, the `count` images back to back, each `height` rows of
//!   `width` pixels of 3 bytes (R, G, B), with no header or padding;
//! * `labels.csv` with header `index,shape,digit,color,label`, one row per
//!   image in order, attribute columns holding indices (shape 0..8, digit
//!   0..10, color 0..10).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::attributes::{AttributeTriple, LabelScheme};
use super::dataset::{DatasetSpec, GeneratedDataset, ImageBatch, DEFAULT_MEMORY_BUDGET};
use super::render::ImageSize;
use super::SynthError;

pub const FORMAT_NAME: &str = "repsim-dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub per_combination_count: usize,
    pub count: usize,
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub scheme: LabelScheme,
}

pub fn save_dataset(dataset: &GeneratedDataset, scheme: LabelScheme, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir)?;
    let manifest = DatasetManifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        seed: dataset.seed,
        per_combination_count: dataset.spec.per_combination_count,
        count: dataset.len(),
        width: dataset.spec.image_size.width,
        height: dataset.spec.image_size.height,
        channels: 3,
        scheme,
    };
    let text = toml::to_string(&manifest).map_err(|e| SynthError::Format(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    fs::write(dir.join("images.bin"), dataset.images().as_bytes())?;

    let mut out = std::io::BufWriter::new(fs::File::create(dir.join("labels.csv"))?);
    writeln!(out, "index,shape,digit,color,label")?;
    for (i, t) in dataset.attributes().iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{}",
            t.shape().index(),
            t.digit(),
            t.color().index(),
            scheme.label(t)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<(GeneratedDataset, LabelScheme), SynthError> {
    let manifest_path = dir.join("manifest.toml");
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| SynthError::Format(format!("{}: {e}", manifest_path.display())))?;
    let m: DatasetManifest =
        toml::from_str(&text).map_err(|e| SynthError::Format(format!("{}: {e}", manifest_path.display())))?;
    if m.format != FORMAT_NAME || m.version != FORMAT_VERSION || m.channels != 3 {
        return Err(SynthError::Format(format!(
            "unsupported dataset format {} v{} with {} channels",
            m.format, m.version, m.channels
        )));
    }
    let size = ImageSize::new(m.width, m.height);
    let pixels = fs::read(dir.join("images.bin"))?;
    if pixels.len() != m.count * size.bytes() {
        return Err(SynthError::Format(format!(
            "images.bin holds {} bytes, expected {}",
            pixels.len(),
            m.count * size.bytes()
        )));
    }

    let mut reader = csv::Reader::from_path(dir.join("labels.csv")).map_err(|e| SynthError::Format(e.to_string()))?;
    let mut attributes = Vec::with_capacity(m.count);
    for (row, rec) in reader.deserialize::<(usize, usize, usize, usize, u32)>().enumerate() {
        let (index, shape, digit, color, label) = rec.map_err(|e| SynthError::Format(e.to_string()))?;
        let t = AttributeTriple::from_indices(shape, digit, color)?;
        if index != row || label != m.scheme.label(&t) {
            return Err(SynthError::Format(format!("labels.csv row {row} is inconsistent")));
        }
        attributes.push(t);
    }
    let spec = DatasetSpec {
        per_combination_count: m.per_combination_count,
        image_size: size,
        memory_budget_bytes: DEFAULT_MEMORY_BUDGET.max(pixels.len() as u64),
    };
    let ds = GeneratedDataset::from_parts(spec, m.seed, ImageBatch::new(size, pixels)?, attributes)?;
    Ok((ds, m.scheme))
}

#[cfg(test)]
mod tests {
    use super::super::dataset::generate_dataset;
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate_dataset(2, 11).unwrap();
        save_dataset(&d, LabelScheme::SD, dir.path()).unwrap();
        let (back, scheme) = load_dataset(dir.path()).unwrap();
        assert_eq!(scheme, LabelScheme::SD);
        assert_eq!(back, d);
        let bin = std::fs::metadata(dir.path().join("images.bin")).unwrap().len();
        assert_eq!(bin as usize, 1600 * 32 * 32 * 3);
    }

    #[test]
    fn truncated_images_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate_dataset(1, 11).unwrap();
        save_dataset(&d, LabelScheme::S, dir.path()).unwrap();
        let p = dir.path().join("images.bin");
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(SynthError::Format(_))));
    }

    #[test]
    fn missing_manifest_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("manifest.toml"), "{err}");
    }
}
