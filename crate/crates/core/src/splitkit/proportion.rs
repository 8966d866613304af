use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::SplitError;

/// An exact overlap proportion in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Proportion(Ratio<u64>);

impl Proportion {
    pub const ZERO: Proportion = Proportion(Ratio::new_raw(0, 1));
    pub const ONE: Proportion = Proportion(Ratio::new_raw(1, 1));

    pub fn new(numer: u64, denom: u64) -> Result<Self, SplitError> {
        if denom == 0 || numer > denom {
            return Err(SplitError::InvalidProportion(format!("{numer}/{denom}")));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `self * n` when it is an integer.
    pub fn times(&self, n: usize) -> Option<usize> {
        let p = self.numer() as u128 * n as u128;
        p.is_multiple_of(self.denom() as u128).then(|| (p / self.denom() as u128) as usize)
    }
}

impl fmt::Display for Proportion {
    /// Exact decimal when the denominator is of the form 2^a 5^b, otherwise
    /// `n/d`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = (self.numer(), self.denom());
        let (mut rest, mut twos, mut fives) = (d, 0u32, 0u32);
        while rest % 2 == 0 {
            rest /= 2;
            twos += 1;
        }
        while rest % 5 == 0 {
            rest /= 5;
            fives += 1;
        }
        if rest != 1 {
            return write!(f, "{n}/{d}");
        }
        let places = twos.max(fives);
        if places == 0 {
            return write!(f, "{}", n / d);
        }
        let scaled = n as u128 * 10u128.pow(places) / d as u128;
        let int = scaled / 10u128.pow(places);
        let frac = scaled % 10u128.pow(places);
        let frac = format!("{frac:0width$}", width = places as usize);
        write!(f, "{int}.{}", frac.trim_end_matches('0'))
    }
}

impl FromStr for Proportion {
    type Err = SplitError;

    /// Parses `0.25`, `1`, or `1/3` exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || SplitError::InvalidProportion(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            return Proportion::new(n, d).map_err(|_| bad());
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 18 {
            return Err(bad());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int.checked_mul(denom).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        Proportion::new(numer, denom).map_err(|_| bad())
    }
}

impl Serialize for Proportion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Proportion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(u64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(i) => Proportion::new(i, 1).map_err(serde::de::Error::custom),
            // floats from config files: use the shortest round-trip text
            Raw::Float(f) => format!("{f}").parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Least common multiple of the denominators, the granularity a split size
/// must be a multiple of for every proportion to be exact.
pub fn denominator_lcm(props: &[Proportion]) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    props.iter().fold(1, |acc, p| acc / gcd(acc, p.denom()) * p.denom())
}
