//! Procedural compositional image dataset: every image carries a shape, a
//! digit, and a color, and [`LabelScheme`]s turn attribute subsets into class
//! labels. All outputs are pure functions of (spec, seed).

mod attributes;
mod dataset;
mod io;
mod probe;
mod render;

pub use attributes::{
    Attribute, AttributeTriple, Color, LabelScheme, Shape, COLOR_COUNT, COMBINATION_COUNT, DIGIT_COUNT,
    SHAPE_COUNT,
};
pub use dataset::{
    apply_scheme, generate, generate_dataset, DatasetSpec, GeneratedDataset, ImageBatch, LabeledSet,
    DEFAULT_MEMORY_BUDGET,
};
pub use io::{load_dataset, save_dataset, DatasetManifest};
pub use probe::{make_ood_probe, OodKind, ProbeSet, ReservedColor, ReservedShape};
pub use render::{
    decode_attributes, render_example, render_example_sized, ImageSize, RasterImage, BACKGROUND, DIGIT_INK,
};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid attribute: {0}")]
    InvalidAttribute(String),
    #[error("label scheme must use at least one attribute")]
    EmptyScheme,
    #[error("per-combination count and probe size must be positive")]
    ZeroCount,
    #[error("dataset needs {needed} bytes, over the {budget}-byte memory budget")]
    MemoryBudget { needed: u64, budget: u64 },
    #[error("out-of-distribution probe needs at least one held-out value")]
    EmptyExclusion,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
