use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SynthError;

pub const SHAPE_COUNT: usize = 8;
pub const DIGIT_COUNT: usize = 10;
pub const COLOR_COUNT: usize = 10;
pub const COMBINATION_COUNT: usize = SHAPE_COUNT * DIGIT_COUNT * COLOR_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Shape {
    Circle,
    Square,
    Triangle,
    Pentagon,
    Hexagon,
    Star,
    Cross,
    Ring,
}

impl Shape {
    pub const ALL: [Shape; SHAPE_COUNT] = [
        Shape::Circle,
        Shape::Square,
        Shape::Triangle,
        Shape::Pentagon,
        Shape::Hexagon,
        Shape::Star,
        Shape::Cross,
        Shape::Ring,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Shape> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Square => "square",
            Shape::Triangle => "triangle",
            Shape::Pentagon => "pentagon",
            Shape::Hexagon => "hexagon",
            Shape::Star => "star",
            Shape::Cross => "cross",
            Shape::Ring => "ring",
        }
    }
}

/// Ten fully saturated hues spaced 36 degrees apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Color {
    Red,
    Orange,
    Lime,
    Green,
    Spring,
    Cyan,
    Azure,
    Indigo,
    Violet,
    Rose,
}

impl Color {
    pub const ALL: [Color; COLOR_COUNT] = [
        Color::Red,
        Color::Orange,
        Color::Lime,
        Color::Green,
        Color::Spring,
        Color::Cyan,
        Color::Azure,
        Color::Indigo,
        Color::Violet,
        Color::Rose,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Color> {
        Self::ALL.get(i).copied()
    }

    pub fn rgb(self) -> [u8; 3] {
        PALETTE[self.index()]
    }

    pub fn from_rgb(rgb: [u8; 3]) -> Option<Color> {
        PALETTE.iter().position(|&p| p == rgb).and_then(Color::from_index)
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Orange => "orange",
            Color::Lime => "lime",
            Color::Green => "green",
            Color::Spring => "spring",
            Color::Cyan => "cyan",
            Color::Azure => "azure",
            Color::Indigo => "indigo",
            Color::Violet => "violet",
            Color::Rose => "rose",
        }
    }
}

// HSV(h, 1, 1) for h = 0, 36, ..., 324.
const PALETTE: [[u8; 3]; COLOR_COUNT] = [
    [255, 0, 0],
    [255, 153, 0],
    [204, 255, 0],
    [51, 255, 0],
    [0, 255, 102],
    [0, 255, 255],
    [0, 102, 255],
    [51, 0, 255],
    [204, 0, 255],
    [255, 0, 153],
];

/// The attributes of one image. Fields are private so every value in
/// circulation satisfies the range invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeTriple {
    shape: Shape,
    digit: u8,
    color: Color,
}

impl AttributeTriple {
    pub fn new(shape: Shape, digit: u8, color: Color) -> Result<Self, SynthError> {
        if digit as usize >= DIGIT_COUNT {
            return Err(SynthError::InvalidAttribute(format!("digit {digit} outside 0..=9")));
        }
        Ok(Self { shape, digit, color })
    }

    pub fn from_indices(shape: usize, digit: usize, color: usize) -> Result<Self, SynthError> {
        let s = Shape::from_index(shape)
            .ok_or_else(|| SynthError::InvalidAttribute(format!("shape index {shape} outside 0..=7")))?;
        let c = Color::from_index(color)
            .ok_or_else(|| SynthError::InvalidAttribute(format!("color index {color} outside 0..=9")))?;
        if digit >= DIGIT_COUNT {
            return Err(SynthError::InvalidAttribute(format!("digit {digit} outside 0..=9")));
        }
        Ok(Self { shape: s, digit: digit as u8, color: c })
    }

    /// Inverse of [`AttributeTriple::combination_index`].
    pub fn from_combination(index: usize) -> Result<Self, SynthError> {
        if index >= COMBINATION_COUNT {
            return Err(SynthError::InvalidAttribute(format!("combination {index} outside 0..800")));
        }
        Self::from_indices(
            index / (DIGIT_COUNT * COLOR_COUNT),
            (index / COLOR_COUNT) % DIGIT_COUNT,
            index % COLOR_COUNT,
        )
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn digit(&self) -> u8 {
        self.digit
    }

    pub fn color(&self) -> Color {
        self.color
    }

    /// Shape-major mixed-radix index; identical to the full-scheme label.
    pub fn combination_index(&self) -> usize {
        LabelScheme::SDC.label(self) as usize
    }

    pub fn all() -> impl Iterator<Item = AttributeTriple> {
        (0..COMBINATION_COUNT).map(|i| Self::from_combination(i).expect("index in range"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    Shape,
    Digit,
    Color,
}

impl Attribute {
    pub fn cardinality(self) -> u32 {
        match self {
            Attribute::Shape => SHAPE_COUNT as u32,
            Attribute::Digit => DIGIT_COUNT as u32,
            Attribute::Color => COLOR_COUNT as u32,
        }
    }

    fn value(self, t: &AttributeTriple) -> u32 {
        match self {
            Attribute::Shape => t.shape.index() as u32,
            Attribute::Digit => t.digit as u32,
            Attribute::Color => t.color.index() as u32,
        }
    }
}

/// Which attributes a class label is built from. The label is the
/// mixed-radix number over the used attributes in shape, digit, color order,
/// so `{S}` labels equal `{S,D,C}` labels divided by 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelScheme {
    shape: bool,
    digit: bool,
    color: bool,
}

impl LabelScheme {
    pub const S: LabelScheme = LabelScheme { shape: true, digit: false, color: false };
    pub const D: LabelScheme = LabelScheme { shape: false, digit: true, color: false };
    pub const C: LabelScheme = LabelScheme { shape: false, digit: false, color: true };
    pub const SD: LabelScheme = LabelScheme { shape: true, digit: true, color: false };
    pub const SC: LabelScheme = LabelScheme { shape: true, digit: false, color: true };
    pub const DC: LabelScheme = LabelScheme { shape: false, digit: true, color: true };
    pub const SDC: LabelScheme = LabelScheme { shape: true, digit: true, color: true };

    pub fn new(shape: bool, digit: bool, color: bool) -> Result<Self, SynthError> {
        if !(shape || digit || color) {
            return Err(SynthError::EmptyScheme);
        }
        Ok(Self { shape, digit, color })
    }

    pub fn attributes(&self) -> Vec<Attribute> {
        let mut v = Vec::with_capacity(3);
        if self.shape {
            v.push(Attribute::Shape);
        }
        if self.digit {
            v.push(Attribute::Digit);
        }
        if self.color {
            v.push(Attribute::Color);
        }
        v
    }

    pub fn class_count(&self) -> u32 {
        self.attributes().iter().map(|a| a.cardinality()).product()
    }

    pub fn label(&self, t: &AttributeTriple) -> u32 {
        self.attributes()
            .iter()
            .fold(0, |acc, a| acc * a.cardinality() + a.value(t))
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .attributes()
            .iter()
            .map(|a| match a {
                Attribute::Shape => "S",
                Attribute::Digit => "D",
                Attribute::Color => "C",
            })
            .collect();
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for LabelScheme {
    type Err = SynthError;

    /// Accepts `S`, `D+C`, `SDC`, `shape+digit`, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mut shape, mut digit, mut color) = (false, false, false);
        let lowered = s.trim().to_ascii_lowercase();
        let tokens: Vec<String> = if lowered.contains('+') || lowered.contains(',') {
            lowered.split(['+', ',']).map(|t| t.trim().to_string()).collect()
        } else if lowered.chars().all(|c| matches!(c, 's' | 'd' | 'c')) {
            lowered.chars().map(String::from).collect()
        } else {
            vec![lowered.clone()]
        };
        for t in tokens {
            let flag = match t.as_str() {
                "s" | "shape" => &mut shape,
                "d" | "digit" => &mut digit,
                "c" | "color" | "colour" => &mut color,
                _ => return Err(SynthError::Parse(format!("unknown label scheme `{s}`"))),
            };
            if *flag {
                return Err(SynthError::Parse(format!("attribute repeated in scheme `{s}`")));
            }
            *flag = true;
        }
        LabelScheme::new(shape, digit, color)
    }
}

impl Serialize for LabelScheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LabelScheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
