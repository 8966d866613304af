use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::attributes::{Color, Shape, COLOR_COUNT, DIGIT_COUNT, SHAPE_COUNT};
use super::dataset::ImageBatch;
use super::render::{render_into, ImageSize, Outline};
use super::SynthError;
use crate::par;
use crate::rng::{derive_seed, rng_from, stream};

/// Colors never used by the training generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReservedColor {
    Gray,
    Brown,
}

impl ReservedColor {
    pub const ALL: [ReservedColor; 2] = [ReservedColor::Gray, ReservedColor::Brown];

    pub fn rgb(self) -> [u8; 3] {
        match self {
            ReservedColor::Gray => [128, 128, 128],
            ReservedColor::Brown => [150, 90, 30],
        }
    }
}

/// Outlines never used by the training generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReservedShape {
    Diamond,
    Ellipse,
}

impl ReservedShape {
    pub const ALL: [ReservedShape; 2] = [ReservedShape::Diamond, ReservedShape::Ellipse];

    fn outline(self) -> Outline {
        match self {
            ReservedShape::Diamond => Outline::Diamond,
            ReservedShape::Ellipse => Outline::Ellipse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OodKind {
    /// Training shapes and digits stroked in reserved colors.
    HeldOutColors(Vec<ReservedColor>),
    /// Reserved outlines with training digits and colors.
    HeldOutShapes(Vec<ReservedShape>),
    /// Uniform per-channel noise.
    Noise,
}

impl OodKind {
    pub fn all_colors() -> Self {
        OodKind::HeldOutColors(ReservedColor::ALL.to_vec())
    }

    pub fn all_shapes() -> Self {
        OodKind::HeldOutShapes(ReservedShape::ALL.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeSet {
    pub kind: OodKind,
    pub seed: u64,
    pub images: ImageBatch,
}

/// Builds an out-of-distribution probe of `count` images.
pub fn make_ood_probe(kind: OodKind, count: usize, size: ImageSize, seed: u64) -> Result<ProbeSet, SynthError> {
    if count == 0 {
        return Err(SynthError::ZeroCount);
    }
    match &kind {
        OodKind::HeldOutColors(v) if v.is_empty() => return Err(SynthError::EmptyExclusion),
        OodKind::HeldOutShapes(v) if v.is_empty() => return Err(SynthError::EmptyExclusion),
        _ => {}
    }
    let mut pixels = vec![0u8; count * size.bytes()];
    par::for_each_chunk_mut(&mut pixels, size.bytes(), |i, buf| {
        let item_seed = derive_seed(seed, &[stream::PROBE, i as u64]);
        let mut r = rng_from(item_seed, &[]);
        match &kind {
            OodKind::HeldOutColors(colors) => {
                let shape = Shape::ALL[r.gen_range(0..SHAPE_COUNT)];
                let digit = r.gen_range(0..DIGIT_COUNT) as u8;
                let color = colors[r.gen_range(0..colors.len())].rgb();
                render_into(Outline::Training(shape), digit, color, size, item_seed, buf);
            }
            OodKind::HeldOutShapes(shapes) => {
                let outline = shapes[r.gen_range(0..shapes.len())].outline();
                let digit = r.gen_range(0..DIGIT_COUNT) as u8;
                let color = Color::ALL[r.gen_range(0..COLOR_COUNT)].rgb();
                render_into(outline, digit, color, size, item_seed, buf);
            }
            OodKind::Noise => {
                let mut nr = rng_from(item_seed, &[stream::NOISE]);
                nr.fill(buf);
            }
        }
    });
    Ok(ProbeSet { kind, seed, images: ImageBatch::new(size, pixels)? })
}

#[cfg(test)]
mod tests {
    use super::super::render::{BACKGROUND, DIGIT_INK};
    use super::*;

    fn stroke_colors(batch: &ImageBatch) -> std::collections::BTreeSet<[u8; 3]> {
        batch
            .as_bytes()
            .chunks_exact(3)
            .map(|p| [p[0], p[1], p[2]])
            .filter(|p| *p != BACKGROUND && *p != DIGIT_INK)
            .collect()
    }

    #[test]
    fn held_out_colors_use_only_reserved_palette() {
        let p = make_ood_probe(OodKind::all_colors(), 50, ImageSize::default(), 1).unwrap();
        let used = stroke_colors(&p.images);
        let reserved: std::collections::BTreeSet<_> = ReservedColor::ALL.iter().map(|c| c.rgb()).collect();
        assert_eq!(used, reserved);
        for c in ReservedColor::ALL {
            assert_eq!(Color::from_rgb(c.rgb()), None);
        }
        let single = make_ood_probe(OodKind::HeldOutColors(vec![ReservedColor::Brown]), 20, ImageSize::default(), 1).unwrap();
        assert_eq!(stroke_colors(&single.images).into_iter().collect::<Vec<_>>(), vec![ReservedColor::Brown.rgb()]);
    }

    #[test]
    fn held_out_shapes_use_training_colors() {
        let p = make_ood_probe(OodKind::all_shapes(), 50, ImageSize::default(), 2).unwrap();
        for c in stroke_colors(&p.images) {
            assert!(Color::from_rgb(c).is_some());
        }
    }

    #[test]
    fn noise_probe_shape_and_determinism() {
        let a = make_ood_probe(OodKind::Noise, 100, ImageSize::default(), 3).unwrap();
        assert_eq!(a.images.len(), 100);
        let b = make_ood_probe(OodKind::Noise, 100, ImageSize::default(), 3).unwrap();
        assert_eq!(a, b);
        let mean = a.images.as_bytes().iter().map(|&v| v as f64).sum::<f64>() / a.images.as_bytes().len() as f64;
        assert!((mean - 127.5).abs() < 2.0, "noise mean {mean}");
    }

    #[test]
    fn empty_exclusions_rejected() {
        let s = ImageSize::default();
        assert!(matches!(make_ood_probe(OodKind::HeldOutColors(vec![]), 5, s, 0), Err(SynthError::EmptyExclusion)));
        assert!(matches!(make_ood_probe(OodKind::HeldOutShapes(vec![]), 5, s, 0), Err(SynthError::EmptyExclusion)));
        assert!(matches!(make_ood_probe(OodKind::Noise, 0, s, 0), Err(SynthError::ZeroCount)));
    }
}
