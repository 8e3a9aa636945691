use crate::error::{Error, Result};
use crate::imaging::{GrayPlane, MaskGrid};

use super::check_shape;

pub const GRAY_LEVELS: usize = 256;

/// Normalized gray-level co-occurrence matrix over 256 levels.
///
/// Stored as raw pair counts; `get` returns the normalized entry.
#[derive(Debug, Clone)]
pub struct Glcm {
    counts: Vec<u32>,
    total: u64,
    offset: (usize, usize),
}

impl Glcm {
    /// Builds a matrix from raw counts (row-major, `256 x 256`).
    pub fn from_counts(counts: Vec<u32>) -> Result<Self> {
        if counts.len() != GRAY_LEVELS * GRAY_LEVELS {
            return Err(Error::invalid("counts", "expected 65536 entries"));
        }
        let total = counts.iter().map(|&c| c as u64).sum();
        Ok(Glcm {
            counts,
            total,
            offset: (0, 1),
        })
    }

    #[inline]
    pub fn get(&self, i: u8, j: u8) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts[i as usize * GRAY_LEVELS + j as usize] as f64 / self.total as f64
    }

    pub fn pair_count(&self) -> u64 {
        self.total
    }

    /// `(dy, dx)` offset the pairs were counted at.
    pub fn offset(&self) -> (usize, usize) {
        self.offset
    }

    /// Nonzero normalized entries.
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        let total = self.total as f64;
        self.counts
            .iter()
            .filter(|&&c| c > 0)
            .map(move |&c| c as f64 / total)
    }
}

/// Counts ordered pairs at offset `(0, +1)` whose endpoints are both missing.
/// Falls back to `(+1, 0)` when the missing region has no horizontal pairs.
pub fn glcm(gray: &GrayPlane, mask: &MaskGrid) -> Result<Glcm> {
    check_shape(gray, mask)?;
    for offset in [(0, 1), (1, 0)] {
        let m = count_pairs(gray, mask, offset);
        if m.total > 0 {
            return Ok(m);
        }
    }
    Err(Error::NoGlcmPairs)
}

fn count_pairs(gray: &GrayPlane, mask: &MaskGrid, (dy, dx): (usize, usize)) -> Glcm {
    let mut counts = vec![0u32; GRAY_LEVELS * GRAY_LEVELS];
    let mut total = 0u64;
    for y in 0..gray.height() - dy {
        for x in 0..gray.width() - dx {
            if mask.is_missing(y, x) && mask.is_missing(y + dy, x + dx) {
                let i = gray.level(y, x) as usize;
                let j = gray.level(y + dy, x + dx) as usize;
                counts[i * GRAY_LEVELS + j] += 1;
                total += 1;
            }
        }
    }
    Glcm {
        counts,
        total,
        offset: (dy, dx),
    }
}

/// `-sum G ln G` with `0 ln 0 = 0`.
pub fn glcm_entropy(g: &Glcm) -> f64 {
    let h: f64 = g.entries().map(|p| -p * p.ln()).sum();
    // exact zero for a single occupied cell rather than -0.0
    h.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_region_single_class() {
        let g = GrayPlane::new(3, 3, vec![0.0; 9]).unwrap();
        let m = glcm(&g, &MaskGrid::all_missing(3, 3)).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.entries().count(), 1);
        assert_eq!(glcm_entropy(&m), 0.0);
    }

    #[test]
    fn checker_2x2() {
        let one = 1.0 / 255.0;
        let g = GrayPlane::new(2, 2, vec![0.0, one, one, 0.0]).unwrap();
        let m = glcm(&g, &MaskGrid::all_missing(2, 2)).unwrap();
        assert_eq!(m.pair_count(), 2);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
        assert!((glcm_entropy(&m) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn uniform_over_k_cells_is_ln_k() {
        for k in [1usize, 3, 17, 256] {
            let mut counts = vec![0u32; GRAY_LEVELS * GRAY_LEVELS];
            for c in counts.iter_mut().step_by(97).take(k) {
                *c = 5;
            }
            let m = Glcm::from_counts(counts).unwrap();
            assert!((glcm_entropy(&m) - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_column_falls_back_to_vertical() {
        let g = GrayPlane::new(4, 4, (0..16).map(|i| i as f64 / 15.0).collect()).unwrap();
        let mut mask = MaskGrid::observed(4, 4);
        for y in 0..4 {
            mask.set(y, 1, false);
        }
        let m = glcm(&g, &mask).unwrap();
        assert_eq!(m.offset(), (1, 0));
        assert_eq!(m.pair_count(), 3);
    }

    #[test]
    fn isolated_pixel_has_no_pairs() {
        let g = GrayPlane::new(3, 3, vec![0.5; 9]).unwrap();
        let mut mask = MaskGrid::observed(3, 3);
        mask.set(1, 1, false);
        assert!(matches!(glcm(&g, &mask), Err(Error::NoGlcmPairs)));
    }
}
