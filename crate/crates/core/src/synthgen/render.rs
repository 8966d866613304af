//! Procedural rasterizer: a colored shape outline with a white seven-segment
//! digit drawn at its center, on a black background. Pixels are sampled at
//! their centers with no anti-aliasing, so every pixel is exactly one of
//! background, stroke color, or digit ink.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::attributes::{AttributeTriple, Color, Shape, DIGIT_COUNT};
use crate::rng::{self, stream};

pub const BACKGROUND: [u8; 3] = [0, 0, 0];
pub const DIGIT_INK: [u8; 3] = [255, 255, 255];

const SHAPE_RADIUS: f64 = 0.34;
const STROKE_WIDTH: f64 = 0.075;
const MAX_SHIFT: f64 = 0.10;
const MAX_SCALE_DEV: f64 = 0.10;
const GLYPH_WIDTH: f64 = 0.50;
const GLYPH_HEIGHT: f64 = 0.90;
const SEGMENT_WIDTH: f64 = 0.17;
const RING_INNER: f64 = 0.60;
const ELLIPSE_MINOR: f64 = 0.60;
const CROSS_ARM: f64 = 0.34;
const STAR_INNER: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub const CHANNELS: usize = 3;

    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn square(side: u32) -> Self {
        Self::new(side, side)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn bytes(&self) -> usize {
        self.pixel_count() * Self::CHANNELS
    }
}

impl Default for ImageSize {
    fn default() -> Self {
        Self::square(32)
    }
}

/// One image: `height` rows of `width` RGB pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub size: ImageSize,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.size.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn non_background_fraction(&self) -> f64 {
        non_background_count(&self.pixels) as f64 / self.size.pixel_count() as f64
    }
}

pub(crate) fn non_background_count(pixels: &[u8]) -> usize {
    pixels.chunks_exact(3).filter(|p| p != &BACKGROUND).count()
}

/// Outline drawn around the digit. Training shapes plus two held-out shapes
/// that only ever appear in out-of-distribution probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Outline {
    Training(Shape),
    Diamond,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Jitter {
    dx: f64,
    dy: f64,
    scale: f64,
}

impl Jitter {
    pub(crate) fn from_seed(seed: u64) -> Self {
        let mut r = rng::rng_from(seed, &[stream::JITTER]);
        Self {
            dx: r.gen_range(-MAX_SHIFT..=MAX_SHIFT),
            dy: r.gen_range(-MAX_SHIFT..=MAX_SHIFT),
            scale: r.gen_range(1.0 - MAX_SCALE_DEV..=1.0 + MAX_SCALE_DEV),
        }
    }
}

/// Pixel-space placement of one glyph.
struct Frame {
    cx: f64,
    cy: f64,
    radius: f64,
    stroke: f64,
}

impl Frame {
    fn new(size: ImageSize, j: Jitter) -> Self {
        let unit = size.width.min(size.height) as f64;
        let radius = SHAPE_RADIUS * unit * j.scale;
        Self {
            cx: size.width as f64 / 2.0 + j.dx * size.width as f64,
            cy: size.height as f64 / 2.0 + j.dy * size.height as f64,
            radius,
            // normalized to the shape radius
            stroke: STROKE_WIDTH * unit / radius,
        }
    }

    fn local(&self, x: u32, y: u32) -> (f64, f64) {
        (
            (x as f64 + 0.5 - self.cx) / self.radius,
            (y as f64 + 0.5 - self.cy) / self.radius,
        )
    }
}

fn regular_polygon(n: usize, start: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let a = start + 2.0 * PI * i as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect()
}

fn star_polygon() -> Vec<(f64, f64)> {
    (0..10)
        .map(|i| {
            let r = if i % 2 == 0 { 1.0 } else { STAR_INNER };
            let a = -PI / 2.0 + PI * i as f64 / 5.0;
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

fn cross_polygon() -> Vec<(f64, f64)> {
    let w = CROSS_ARM;
    vec![
        (-w, -1.0),
        (w, -1.0),
        (w, -w),
        (1.0, -w),
        (1.0, w),
        (w, w),
        (w, 1.0),
        (-w, 1.0),
        (-w, w),
        (-1.0, w),
        (-1.0, -w),
        (-w, -w),
    ]
}

fn point_in_polygon(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn distance_to_boundary(p: (f64, f64), poly: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (ax, ay) = poly[j];
        let (bx, by) = poly[i];
        let (ex, ey) = (bx - ax, by - ay);
        let t = (((p.0 - ax) * ex + (p.1 - ay) * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
        let (qx, qy) = (ax + t * ex - p.0, ay + t * ey - p.1);
        best = best.min((qx * qx + qy * qy).sqrt());
        j = i;
    }
    best
}

enum Geometry {
    Polygon(Vec<(f64, f64)>),
    Circle,
    Ring,
    Ellipse,
}

impl Outline {
    fn geometry(self) -> Geometry {
        match self {
            Outline::Training(Shape::Circle) => Geometry::Circle,
            Outline::Training(Shape::Ring) => Geometry::Ring,
            Outline::Training(Shape::Square) => Geometry::Polygon(regular_polygon(4, -PI / 4.0)),
            Outline::Training(Shape::Triangle) => Geometry::Polygon(regular_polygon(3, -PI / 2.0)),
            Outline::Training(Shape::Pentagon) => Geometry::Polygon(regular_polygon(5, -PI / 2.0)),
            Outline::Training(Shape::Hexagon) => Geometry::Polygon(regular_polygon(6, 0.0)),
            Outline::Training(Shape::Star) => Geometry::Polygon(star_polygon()),
            Outline::Training(Shape::Cross) => Geometry::Polygon(cross_polygon()),
            Outline::Diamond => Geometry::Polygon(regular_polygon(4, -PI / 2.0)),
            Outline::Ellipse => Geometry::Ellipse,
        }
    }
}

impl Geometry {
    /// True when the normalized point lies on the outline stroke of
    /// normalized width `w`.
    fn on_stroke(&self, p: (f64, f64), w: f64) -> bool {
        let r = (p.0 * p.0 + p.1 * p.1).sqrt();
        match self {
            Geometry::Circle => r <= 1.0 && 1.0 - r <= w,
            Geometry::Ring => (r <= 1.0 && 1.0 - r <= w) || (r <= RING_INNER && RING_INNER - r <= w),
            Geometry::Ellipse => {
                let b = ELLIPSE_MINOR;
                let f = ((p.0 * p.0) + (p.1 * p.1) / (b * b)).sqrt();
                if f > 1.0 {
                    return false;
                }
                // first-order distance to the level set f = 1
                let g = if f > 0.0 {
                    ((p.0 * p.0) + (p.1 * p.1) / (b * b * b * b)).sqrt() / f
                } else {
                    1.0 / b
                };
                (1.0 - f) / g <= w
            }
            Geometry::Polygon(poly) => point_in_polygon(p, poly) && distance_to_boundary(p, poly) <= w,
        }
    }
}

// Segment order a..g: top, upper-right, lower-right, bottom, lower-left,
// upper-left, middle.
const SEGMENTS: [u8; DIGIT_COUNT] = [
    0b0111111, // 0: abcdef
    0b0000110, // 1: bc
    0b1011011, // 2: abdeg
    0b1001111, // 3: abcdg
    0b1100110, // 4: bcfg
    0b1101101, // 5: acdfg
    0b1111101, // 6: acdefg
    0b0000111, // 7: abc
    0b1111111, // 8
    0b1101111, // 9: abcdfg
];

/// Whether the normalized point is covered by the glyph of `digit`.
fn on_digit(p: (f64, f64), digit: u8) -> bool {
    let (hw, hh, s) = (GLYPH_WIDTH / 2.0, GLYPH_HEIGHT / 2.0, SEGMENT_WIDTH);
    let (x, y) = p;
    if x < -hw || x > hw || y < -hh || y > hh {
        return false;
    }
    let mask = SEGMENTS[digit as usize];
    let on = |bit: u8| mask & (1 << bit) != 0;
    let left = x <= -hw + s;
    let right = x >= hw - s;
    let upper = y <= 0.0;
    (on(0) && y <= -hh + s)
        || (on(3) && y >= hh - s)
        || (on(6) && y.abs() <= s / 2.0)
        || (on(1) && right && upper)
        || (on(2) && right && !upper)
        || (on(4) && left && !upper)
        || (on(5) && left && upper)
}

/// Draws one glyph into `buf` (HWC, `size.bytes()` long).
pub(crate) fn render_into(
    outline: Outline,
    digit: u8,
    color: [u8; 3],
    size: ImageSize,
    jitter_seed: u64,
    buf: &mut [u8],
) {
    debug_assert_eq!(buf.len(), size.bytes());
    let frame = Frame::new(size, Jitter::from_seed(jitter_seed));
    let geom = outline.geometry();
    for y in 0..size.height {
        for x in 0..size.width {
            let p = frame.local(x, y);
            let px = if on_digit(p, digit) {
                DIGIT_INK
            } else if geom.on_stroke(p, frame.stroke) {
                color
            } else {
                BACKGROUND
            };
            let i = (y as usize * size.width as usize + x as usize) * 3;
            buf[i..i + 3].copy_from_slice(&px);
        }
    }
}

/// Renders `triple` at the default 32x32 size.
pub fn render_example(triple: &AttributeTriple, jitter_seed: u64) -> RasterImage {
    render_example_sized(triple, jitter_seed, ImageSize::default())
}

pub fn render_example_sized(triple: &AttributeTriple, jitter_seed: u64, size: ImageSize) -> RasterImage {
    let mut pixels = vec![0u8; size.bytes()];
    render_into(
        Outline::Training(triple.shape()),
        triple.digit(),
        triple.color().rgb(),
        size,
        jitter_seed,
        &mut pixels,
    );
    RasterImage { size, pixels }
}

fn masks(size: ImageSize, jitter_seed: u64, f: impl Fn((f64, f64), f64) -> bool) -> Vec<bool> {
    let frame = Frame::new(size, Jitter::from_seed(jitter_seed));
    let mut m = Vec::with_capacity(size.pixel_count());
    for y in 0..size.height {
        for x in 0..size.width {
            m.push(f(frame.local(x, y), frame.stroke));
        }
    }
    m
}

/// Recovers the attributes of a rendered image given its jitter seed, by
/// matching observed stroke and ink pixels against the geometry and color
/// tables. Returns `None` when no palette color is present.
pub fn decode_attributes(pixels: &[u8], size: ImageSize, jitter_seed: u64) -> Option<AttributeTriple> {
    let px: Vec<[u8; 3]> = pixels.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let ink: Vec<bool> = px.iter().map(|p| *p == DIGIT_INK).collect();
    let stroke: Vec<bool> = px.iter().map(|p| *p != DIGIT_INK && *p != BACKGROUND).collect();

    let mut counts = std::collections::BTreeMap::new();
    for (p, s) in px.iter().zip(&stroke) {
        if *s {
            *counts.entry(*p).or_insert(0usize) += 1;
        }
    }
    let (&rgb, _) = counts.iter().max_by_key(|(rgb, n)| (**n, std::cmp::Reverse(**rgb)))?;
    let color = Color::from_rgb(rgb)?;

    // Ink pixels hide whatever stroke lies underneath, so they are ignored
    // when scoring outlines.
    let shape = Shape::ALL
        .iter()
        .copied()
        .min_by_key(|&s| {
            let geom = Outline::Training(s).geometry();
            let m = masks(size, jitter_seed, |p, w| geom.on_stroke(p, w));
            m.iter()
                .zip(&stroke)
                .zip(&ink)
                .filter(|((m, s), i)| !**i && *m != *s)
                .count()
        })
        .expect("nonempty shape table");
    let digit = (0..DIGIT_COUNT as u8)
        .min_by_key(|&d| {
            let m = masks(size, jitter_seed, |p, _| on_digit(p, d));
            m.iter().zip(&ink).filter(|(m, i)| m != i).count()
        })
        .expect("nonempty digit table");
    AttributeTriple::new(shape, digit, color).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_is_deterministic() {
        let t = AttributeTriple::new(Shape::Circle, 7, Color::Red).unwrap();
        assert_eq!(render_example(&t, 0), render_example(&t, 0));
    }

    #[test]
    fn jitter_changes_pixels_but_not_content() {
        let t = AttributeTriple::new(Shape::Circle, 7, Color::Red).unwrap();
        let a = render_example(&t, 0);
        let b = render_example(&t, 1);
        assert_ne!(a.pixels, b.pixels);
        assert_eq!(decode_attributes(&a.pixels, a.size, 0), Some(t));
        assert_eq!(decode_attributes(&b.pixels, b.size, 1), Some(t));
    }

    #[test]
    fn every_triple_decodes_back() {
        for (i, t) in AttributeTriple::all().enumerate() {
            for seed in [i as u64, 1_000 + i as u64] {
                let img = render_example(&t, seed);
                assert_eq!(decode_attributes(&img.pixels, img.size, seed), Some(t), "seed {seed}");
            }
        }
    }

    #[test]
    fn enough_foreground_everywhere() {
        // brute force over the full cross product and a spread of jitters
        let mut min_frac = 1.0f64;
        for (i, t) in AttributeTriple::all().enumerate() {
            for seed in [0, 17, 123_456 + i as u64] {
                min_frac = min_frac.min(render_example(&t, seed).non_background_fraction());
            }
        }
        assert!(min_frac >= 0.05, "min foreground fraction {min_frac}");
    }

    #[test]
    fn only_three_pixel_classes() {
        let t = AttributeTriple::new(Shape::Star, 8, Color::Azure).unwrap();
        let img = render_example(&t, 5);
        for p in img.pixels.chunks_exact(3) {
            let p = [p[0], p[1], p[2]];
            assert!(p == BACKGROUND || p == DIGIT_INK || p == Color::Azure.rgb());
        }
    }

    #[test]
    fn glyph_stays_inside_the_frame() {
        // the outline never touches the outer border for any jitter
        for seed in 0..200 {
            for s in Shape::ALL {
                let t = AttributeTriple::new(s, 8, Color::Red).unwrap();
                let img = render_example(&t, seed);
                let w = img.size.width;
                for k in 0..w {
                    for (x, y) in [(k, 0), (k, w - 1), (0, k), (w - 1, k)] {
                        assert_eq!(img.pixel(x, y), BACKGROUND);
                    }
                }
            }
        }
    }

    #[test]
    fn other_sizes_render() {
        let t = AttributeTriple::new(Shape::Hexagon, 3, Color::Lime).unwrap();
        let img = render_example_sized(&t, 9, ImageSize::new(48, 40));
        assert_eq!(img.pixels.len(), 48 * 40 * 3);
        assert_eq!(decode_attributes(&img.pixels, img.size, 9), Some(t));
    }
}
