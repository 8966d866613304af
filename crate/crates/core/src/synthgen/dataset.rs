use serde::{Deserialize, Serialize};

use super::attributes::{AttributeTriple, LabelScheme, COMBINATION_COUNT};
use super::render::{render_into, ImageSize, Outline, RasterImage};
use super::SynthError;
use crate::par;
use crate::rng::{derive_seed, stream};

/// Default cap on the pixel buffer of one generated dataset.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// A contiguous stack of equally sized RGB images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBatch {
    size: ImageSize,
    pixels: Vec<u8>,
}

impl ImageBatch {
    pub fn new(size: ImageSize, pixels: Vec<u8>) -> Result<Self, SynthError> {
        if size.bytes() == 0 || !pixels.len().is_multiple_of(size.bytes()) {
            return Err(SynthError::Format(format!(
                "pixel buffer of {} bytes is not a whole number of {}x{} images",
                pixels.len(),
                size.width,
                size.height
            )));
        }
        Ok(Self { size, pixels })
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.pixels.len() / self.size.bytes()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let b = self.size.bytes();
        &self.pixels[i * b..(i + 1) * b]
    }

    pub fn raster(&self, i: usize) -> RasterImage {
        RasterImage { size: self.size, pixels: self.image(i).to_vec() }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    /// Copies the listed images into a new batch.
    pub fn select(&self, ids: &[usize]) -> ImageBatch {
        let mut pixels = Vec::with_capacity(ids.len() * self.size.bytes());
        for &i in ids {
            pixels.extend_from_slice(self.image(i));
        }
        ImageBatch { size: self.size, pixels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub per_combination_count: usize,
    pub image_size: ImageSize,
    pub memory_budget_bytes: u64,
}

impl DatasetSpec {
    pub fn new(per_combination_count: usize) -> Self {
        Self {
            per_combination_count,
            image_size: ImageSize::default(),
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn with_image_size(mut self, size: ImageSize) -> Self {
        self.image_size = size;
        self
    }

    pub fn example_count(&self) -> usize {
        COMBINATION_COUNT * self.per_combination_count
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.per_combination_count == 0 {
            return Err(SynthError::ZeroCount);
        }
        if self.image_size.width < 8 || self.image_size.height < 8 {
            return Err(SynthError::InvalidAttribute(format!(
                "image size {}x{} below the 8x8 minimum",
                self.image_size.width, self.image_size.height
            )));
        }
        let bytes = (self.example_count() as u64).saturating_mul(self.image_size.bytes() as u64);
        if bytes > self.memory_budget_bytes {
            return Err(SynthError::MemoryBudget { needed: bytes, budget: self.memory_budget_bytes });
        }
        Ok(())
    }
}

/// Example `i` has combination `i % 800` and repetition `i / 800`, so every
/// attribute combination appears exactly `per_combination_count` times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedDataset {
    pub spec: DatasetSpec,
    pub seed: u64,
    images: ImageBatch,
    attributes: Vec<AttributeTriple>,
}

impl GeneratedDataset {
    pub(crate) fn from_parts(
        spec: DatasetSpec,
        seed: u64,
        images: ImageBatch,
        attributes: Vec<AttributeTriple>,
    ) -> Result<Self, SynthError> {
        if images.len() != attributes.len() || images.len() != spec.example_count() {
            return Err(SynthError::Format(format!(
                "{} images and {} attribute rows for a spec of {} examples",
                images.len(),
                attributes.len(),
                spec.example_count()
            )));
        }
        Ok(Self { spec, seed, images, attributes })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn images(&self) -> &ImageBatch {
        &self.images
    }

    pub fn attributes(&self) -> &[AttributeTriple] {
        &self.attributes
    }

    pub fn jitter_seed(&self, index: usize) -> u64 {
        example_jitter_seed(self.seed, index)
    }
}

pub(crate) fn example_jitter_seed(dataset_seed: u64, index: usize) -> u64 {
    derive_seed(dataset_seed, &[stream::JITTER, index as u64])
}

/// Generates `800 * per_combination_count` 32x32 examples.
pub fn generate_dataset(per_combination_count: usize, seed: u64) -> Result<GeneratedDataset, SynthError> {
    generate(&DatasetSpec::new(per_combination_count), seed)
}

pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<GeneratedDataset, SynthError> {
    spec.validate()?;
    let n = spec.example_count();
    let size = spec.image_size;
    let attributes: Vec<AttributeTriple> = (0..n)
        .map(|i| AttributeTriple::from_combination(i % COMBINATION_COUNT))
        .collect::<Result<_, _>>()?;
    let mut pixels = vec![0u8; n * size.bytes()];
    par::for_each_chunk_mut(&mut pixels, size.bytes(), |i, buf| {
        let t = &attributes[i];
        render_into(
            Outline::Training(t.shape()),
            t.digit(),
            t.color().rgb(),
            size,
            example_jitter_seed(seed, i),
            buf,
        );
    });
    GeneratedDataset::from_parts(*spec, seed, ImageBatch::new(size, pixels)?, attributes)
}

/// A set of example ids from one dataset with dense class ids in
/// `0..class_count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub ids: Vec<usize>,
    pub labels: Vec<u32>,
    pub class_count: u32,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count as usize];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// Labels every example of `dataset` under `scheme`.
pub fn apply_scheme(dataset: &GeneratedDataset, scheme: LabelScheme) -> LabeledSet {
    LabeledSet {
        ids: (0..dataset.len()).collect(),
        labels: dataset.attributes().iter().map(|t| scheme.label(t)).collect(),
        class_count: scheme.class_count(),
    }
}
