use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of an irregular mask's missing fraction from its target.
pub const IRREGULAR_TOLERANCE: f64 = 0.02;
const MAX_HOLE_ATTEMPTS: usize = 20_000;

/// Binary grid: 1 = observed, 0 = missing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskGrid {
    height: usize,
    width: usize,
    bits: Vec<u8>,
}

impl MaskGrid {
    pub fn new(height: usize, width: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::InvalidDimensions {
                height,
                width,
                reason: "mask length does not match height * width",
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Malformed {
                what: "mask".into(),
                reason: "values must be 0 or 1".into(),
            });
        }
        Ok(MaskGrid {
            height,
            width,
            bits,
        })
    }

    /// A mask with every pixel observed.
    pub fn observed(height: usize, width: usize) -> Self {
        MaskGrid {
            height,
            width,
            bits: vec![1; height * width],
        }
    }

    /// A mask with every pixel missing.
    pub fn all_missing(height: usize, width: usize) -> Self {
        MaskGrid {
            height,
            width,
            bits: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn is_missing(&self, y: usize, x: usize) -> bool {
        self.get(y, x) == 0
    }

    pub fn set(&mut self, y: usize, x: usize, observed: bool) {
        self.bits[y * self.width + x] = observed as u8;
    }

    pub fn missing_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 0).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        self.missing_count() as f64 / self.bits.len() as f64
    }

    pub(crate) fn require_missing(&self) -> Result<usize> {
        match self.missing_count() {
            0 => Err(Error::EmptyMissingRegion),
            n => Ok(n),
        }
    }
}

/// Centered `h/2 x w/2` missing block.
pub fn regular_mask(height: usize, width: usize) -> Result<MaskGrid> {
    if height % 2 != 0 || width % 2 != 0 || height < 4 || width < 4 {
        return Err(Error::InvalidDimensions {
            height,
            width,
            reason: "regular masks need even dimensions of at least 4",
        });
    }
    let mut mask = MaskGrid::observed(height, width);
    let (top, left) = (height / 4, width / 4);
    for y in top..top + height / 2 {
        for x in left..left + width / 2 {
            mask.set(y, x, false);
        }
    }
    Ok(mask)
}

/// Union of random axis-aligned rectangles and ellipses whose missing fraction
/// lands within `target_ratio ± 0.02`. Hole sides are uniform in
/// `[dim/16, dim/4]`. Deterministic for a given seed.
pub fn irregular_mask(
    height: usize,
    width: usize,
    target_ratio: f64,
    seed: u64,
) -> Result<MaskGrid> {
    if !(target_ratio > 0.0 && target_ratio < 1.0) {
        return Err(Error::invalid("target_ratio", "must lie in (0, 1)"));
    }
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions {
            height,
            width,
            reason: "mask must be non-empty",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (height * width) as f64;
    let upper = target_ratio + IRREGULAR_TOLERANCE;
    let lower = target_ratio - IRREGULAR_TOLERANCE;
    let side_range = |dim: usize| ((dim / 16).max(1), (dim / 4).max(1));
    let (min_h, max_h) = side_range(height);
    let (min_w, max_w) = side_range(width);

    let mut mask = MaskGrid::observed(height, width);
    let mut missing = 0usize;
    let mut scratch = Vec::new();
    for _ in 0..MAX_HOLE_ATTEMPTS {
        let hole_h = rng.random_range(min_h..=max_h);
        let hole_w = rng.random_range(min_w..=max_w);
        let top = rng.random_range(0..=height - hole_h.min(height));
        let left = rng.random_range(0..=width - hole_w.min(width));
        let ellipse = rng.random_bool(0.5);

        scratch.clear();
        for y in top..(top + hole_h).min(height) {
            for x in left..(left + hole_w).min(width) {
                if ellipse && !inside_ellipse(y - top, x - left, hole_h, hole_w) {
                    continue;
                }
                if !mask.is_missing(y, x) {
                    scratch.push((y, x));
                }
            }
        }
        if scratch.is_empty() || (missing + scratch.len()) as f64 / total > upper {
            continue;
        }
        for &(y, x) in &scratch {
            mask.set(y, x, false);
        }
        missing += scratch.len();
        if missing as f64 / total >= target_ratio {
            break;
        }
    }
    let achieved = missing as f64 / total;
    if achieved < lower || achieved > upper {
        return Err(Error::UnreachableMaskRatio {
            target: target_ratio,
            achieved,
            attempts: MAX_HOLE_ATTEMPTS,
        });
    }
    Ok(mask)
}

fn inside_ellipse(dy: usize, dx: usize, h: usize, w: usize) -> bool {
    let ry = h as f64 / 2.0;
    let rx = w as f64 / 2.0;
    let ny = (dy as f64 + 0.5 - ry) / ry;
    let nx = (dx as f64 + 0.5 - rx) / rx;
    ny * ny + nx * nx <= 1.0
}

/// How masks are produced for a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Regular,
    Irregular,
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMode::Regular => "regular",
            MaskMode::Irregular => "irregular",
        })
    }
}

impl FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(MaskMode::Regular),
            "irregular" => Ok(MaskMode::Irregular),
            other => Err(Error::invalid(
                "mask",
                format!("unknown mask mode `{other}` (expected regular or irregular)"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_mask_128() {
        let m = regular_mask(128, 128).unwrap();
        assert_eq!(m.missing_count(), 4096);
        assert!(m.is_missing(32, 32) && m.is_missing(95, 95));
        assert!(!m.is_missing(31, 32) && !m.is_missing(96, 95));
    }

    #[test]
    fn regular_mask_smallest() {
        let m = regular_mask(4, 4).unwrap();
        assert_eq!(m.bits(), &[1, 1, 1, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn regular_mask_rectangular_count() {
        assert_eq!(regular_mask(8, 16).unwrap().missing_count(), 32);
    }

    #[test]
    fn regular_mask_rejects_odd() {
        assert!(regular_mask(7, 8).is_err());
        assert!(regular_mask(8, 9).is_err());
        assert!(regular_mask(2, 2).is_err());
    }

    #[test]
    fn irregular_mask_hits_tolerance_for_many_seeds() {
        for seed in 0..100 {
            let m = irregular_mask(128, 128, 0.25, seed).unwrap();
            let f = m.missing_fraction();
            assert!((0.23..=0.27).contains(&f), "seed {seed}: {f}");
        }
    }

    #[test]
    fn irregular_mask_is_deterministic() {
        assert_eq!(
            irregular_mask(64, 48, 0.3, 7).unwrap(),
            irregular_mask(64, 48, 0.3, 7).unwrap()
        );
        assert_ne!(
            irregular_mask(64, 48, 0.3, 7).unwrap(),
            irregular_mask(64, 48, 0.3, 8).unwrap()
        );
    }

    #[test]
    fn irregular_mask_validates_ratio() {
        assert!(irregular_mask(32, 32, 0.0, 1).is_err());
        assert!(irregular_mask(32, 32, 1.0, 1).is_err());
    }

    #[test]
    fn mask_mode_parses() {
        assert_eq!("regular".parse::<MaskMode>().unwrap(), MaskMode::Regular);
        assert!("holes".parse::<MaskMode>().is_err());
    }
}
