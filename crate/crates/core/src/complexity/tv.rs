use crate::error::Result;
use crate::imaging::{GrayPlane, MaskGrid};

use super::check_shape;

/// Sum of absolute right- and down-neighbour differences, each gated by
/// `1 - m` at the left/top pixel of the pair. Computed on `[0, 1]` values.
pub fn total_variation(gray: &GrayPlane, mask: &MaskGrid) -> Result<f64> {
    check_shape(gray, mask)?;
    let (h, w) = (gray.height(), gray.width());
    let mut tv = 0.0;
    for y in 0..h {
        for x in 0..w {
            if !mask.is_missing(y, x) {
                continue;
            }
            let g = gray.get(y, x);
            if x + 1 < w {
                tv += (gray.get(y, x + 1) - g).abs();
            }
            if y + 1 < h {
                tv += (gray.get(y + 1, x) - g).abs();
            }
        }
    }
    Ok(tv)
}
