use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imaging::{irregular_mask, load_image, load_manifest, regular_mask, ImageTensor, MaskGrid, MaskMode};

/// Images plus the rule for producing their masks.
///
/// Regular masks are fixed. Irregular masks are regenerated every epoch from
/// `(mask_seed, sample, epoch)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<ImageTensor>,
    pub mask_mode: MaskMode,
    pub mask_ratio: f64,
    pub mask_seed: u64,
}

impl Dataset {
    pub fn new(images: Vec<ImageTensor>, mask_mode: MaskMode, mask_ratio: f64, mask_seed: u64) -> Self {
        Dataset {
            images,
            mask_mode,
            mask_ratio,
            mask_seed,
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn mask_for(&self, id: usize, epoch: u64) -> Result<MaskGrid> {
        let img = &self.images[id];
        match self.mask_mode {
            MaskMode::Regular => regular_mask(img.height(), img.width()),
            MaskMode::Irregular => {
                let seed = self
                    .mask_seed
                    .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                    .wrapping_add((id as u64) << 20)
                    .wrapping_add(epoch);
                irregular_mask(img.height(), img.width(), self.mask_ratio, seed)
            }
        }
    }

    pub fn masks_for_epoch(&self, epoch: u64) -> Result<Vec<MaskGrid>> {
        (0..self.len()).map(|id| self.mask_for(id, epoch)).collect()
    }

    /// Loads every manifest entry, resized to `size x size`.
    pub fn from_manifest(
        manifest: &Path,
        size: usize,
        mask_mode: MaskMode,
        mask_ratio: f64,
        mask_seed: u64,
    ) -> Result<Self> {
        let images = load_manifest(manifest)?
            .iter()
            .map(|p| load_image(p, Some(size)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::new(images, mask_mode, mask_ratio, mask_seed))
    }
}

/// Grayscale images built from a smooth gradient background and up to four
/// rectangular patches of uniform high-frequency noise with random amplitude.
/// The number and strength of the patches spread the samples' texture
/// complexity.
pub fn synthetic_textured(n: usize, size: usize, seed: u64) -> Result<Vec<ImageTensor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let base = rng.random_range(0.25..0.75);
            let gy = rng.random_range(-0.3..0.3) / size as f64;
            let gx = rng.random_range(-0.3..0.3) / size as f64;
            let mut px: Vec<f64> = (0..size * size)
                .map(|i| base + gy * (i / size) as f64 + gx * (i % size) as f64)
                .collect();
            let patches = rng.random_range(0..=4);
            for _ in 0..patches {
                let ph = rng.random_range(size / 8..=size / 2);
                let pw = rng.random_range(size / 8..=size / 2);
                let top = rng.random_range(0..=size - ph);
                let left = rng.random_range(0..=size - pw);
                let amp = rng.random_range(0.05..0.4);
                for y in top..top + ph {
                    for x in left..left + pw {
                        px[y * size + x] += rng.random_range(-amp..amp);
                    }
                }
            }
            px.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            ImageTensor::new(size, size, 1, px)
        })
        .collect()
}

/// Disjoint synthetic train and test datasets.
pub fn synthetic_split(
    train: usize,
    test: usize,
    size: usize,
    mask_mode: MaskMode,
    mask_ratio: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let mut images = synthetic_textured(train + test, size, seed)?;
    let test_images = images.split_off(train);
    Ok((
        Dataset::new(images, mask_mode, mask_ratio, seed),
        Dataset::new(test_images, mask_mode, mask_ratio, seed ^ 0x7e57),
    ))
}
